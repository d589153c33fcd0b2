"""Non-interactive figure scripts for the thin-film nematic CSV
artifacts: pure file-to-file transforms, deterministic given inputs."""

__version__ = "0.1.0"

from .jobs import FigureJob, FigureError, plot  # noqa: F401
