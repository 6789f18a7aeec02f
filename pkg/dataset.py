# dataset.py
# Loads the two-directory corpus: violated pages and (optionally) their corrected counterparts.

import logging
from pathlib import Path
from typing import Dict, List

from config import FIXED_DIRNAME, VIOLATED_DIRNAME
from errors import DatasetError, OrphanFileError
from schemas import Dataset, DatasetPair, LabeledSample

logger = logging.getLogger(__name__)

HTML_SUFFIXES = {".html", ".htm"}

SOURCE_VIOLATED = "violated"
SOURCE_FIXED = "fixed"


def _html_files(directory: Path) -> Dict[str, Path]:
    return {
        path.name: path
        for path in sorted(directory.iterdir())
        if path.is_file() and path.suffix.lower() in HTML_SUFFIXES
    }


def load_dataset(root: Path) -> Dataset:
    """
    Pair violated and fixed pages by filename and label them.

    Args:
        root: Directory holding scraped_sites/ and optionally scraped_sites_fixed/

    Returns:
        Dataset: Pairs in filename order; violated samples labelled 1, fixed samples 0

    Raises:
        DatasetError: If scraped_sites/ is missing
        OrphanFileError: If a fixed file has no violated counterpart
    """
    root = Path(root)
    violated_dir = root / VIOLATED_DIRNAME
    if not violated_dir.is_dir():
        raise DatasetError(f"Dataset root {root} has no {VIOLATED_DIRNAME}/ directory")
    violated = _html_files(violated_dir)

    fixed: Dict[str, Path] = {}
    fixed_dir = root / FIXED_DIRNAME
    if fixed_dir.is_dir():
        fixed = _html_files(fixed_dir)
        for name in fixed:
            if name not in violated:
                raise OrphanFileError(name)
    else:
        logger.info(f"No {FIXED_DIRNAME}/ under {root}; detection-only dataset")

    pairs: List[DatasetPair] = []
    samples: List[LabeledSample] = []
    for name, path in violated.items():
        pairs.append(DatasetPair(file_id=name, violated_path=path, fixed_path=fixed.get(name)))
        samples.append(LabeledSample(file_id=name, path=path, label=1, source=SOURCE_VIOLATED))
    for name, path in fixed.items():
        samples.append(LabeledSample(file_id=name, path=path, label=0, source=SOURCE_FIXED))

    missing = len(violated) - len(fixed)
    if fixed and missing:
        logger.warning(f"{missing} violated files have no fixed counterpart")
    logger.info(f"Loaded {len(pairs)} pairs and {len(samples)} labeled samples from {root}")
    return Dataset(root=root, pairs=pairs, samples=samples)
