"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, title: str, ok: bool, detail: str, seconds: float) -> str:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} ({seconds:.2f}s)"
    LINES.append(line)
    print(line)
    return line
