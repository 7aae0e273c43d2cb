"""Loading helpers for the data files bundled with the package."""

from importlib import resources


def _data_text(relpath: str) -> str:
    root = resources.files("tensioncorpus") / "data"
    return (root / relpath).read_text(encoding="utf-8")


def load_lines(relpath: str) -> list[str]:
    """Read a one-entry-per-line data file, skipping blanks and # comments."""
    out = []
    for line in _data_text(relpath).splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def load_table(relpath: str) -> dict[str, str]:
    """Read a tab-separated two-column data file into a dict."""
    table = {}
    for line in load_lines(relpath):
        key, _, value = line.partition("\t")
        table[key.strip()] = value.strip()
    return table
