import os


def worker_count() -> int:
    """Worker cap from ``STOPBOUND_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("STOPBOUND_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"STOPBOUND_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("STOPBOUND_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)
