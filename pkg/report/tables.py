"""CSV emission for scan, covariance, validation and fidelity tables."""

import logging
from pathlib import Path
from typing import Union

import pandas as pd

logger = logging.getLogger(__name__)

# Round-trip precision for doubles
FLOAT_FORMAT = "%.17g"


def to_csv_text(frame: pd.DataFrame) -> str:
    """Render ``frame`` as comma-separated text with LF line endings and no index."""
    return frame.to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT)


def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    """Write ``frame`` to ``path``, creating parent directories.

    Args:
        path: Destination file.
        frame: Table to write; column order is kept.

    Returns:
        The written path.
    """
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(to_csv_text(frame), encoding="utf-8")
    logger.info(f"Wrote {out} ({len(frame)} rows)")
    return out
