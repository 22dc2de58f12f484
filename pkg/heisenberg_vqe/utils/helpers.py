"""
Helper utilities for Heisenberg VQE
"""
import math
from typing import List, Optional, Sequence


def format_duration(seconds):
    """Format seconds as h:mm:ss, or m:ss below one hour

    Args:
        seconds (float): Number of seconds

    Returns:
        str: Formatted duration
    """
    if seconds < 0 or not math.isfinite(seconds):
        return "0:00"

    minutes, seconds = divmod(int(seconds), 60)
    hours, minutes = divmod(minutes, 60)
    if hours:
        return f"{hours}:{minutes:02d}:{seconds:02d}"
    return f"{minutes}:{seconds:02d}"


def relative_energy_error(energy: float, e0: Optional[float]) -> Optional[float]:
    """|(E - E0) / E0|, or None without a usable reference

    Args:
        energy: Variational energy
        e0: Exact ground energy

    Returns:
        float or None
    """
    if e0 is None or e0 == 0 or not math.isfinite(e0) or not math.isfinite(energy):
        return None
    return abs((energy - e0) / e0)


def parse_int_list(text: str) -> List[int]:
    """Parse "1,2,5-8" into [1, 2, 5, 6, 7, 8]

    Args:
        text (str): Comma separated non-negative integers and inclusive ranges

    Returns:
        list: Integers in the order given

    Raises:
        ValueError: Malformed item or a descending range
    """
    values: List[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "-" in item:
            start, stop = item.split("-", 1)
            low, high = int(start), int(stop)
            if high < low:
                raise ValueError(f"descending range '{item}'")
            values.extend(range(low, high + 1))
        else:
            values.append(int(item))
    return values


def monotonic_violations(values: Sequence[float], tolerance: float = 1e-12) -> List[int]:
    """Indices i where values[i] rises above values[i - 1]

    Args:
        values: A trace expected to be non-increasing
        tolerance: Rises up to this size are ignored

    Returns:
        list: Offending indices
    """
    return [i for i in range(1, len(values))
            if math.isfinite(values[i]) and math.isfinite(values[i - 1])
            and values[i] > values[i - 1] + tolerance]
