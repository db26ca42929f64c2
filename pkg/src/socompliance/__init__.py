"""Minimal compliant demand for system-optimal routing in congested networks."""
from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled TNTP file, e.g. ``data_path("SiouxFalls_net.tntp")``."""
    path = Path(str(resources.files(__name__).joinpath("data", name)))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled data file {name!r}")
    return path
