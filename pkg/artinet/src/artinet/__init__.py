"""artinet: toy convolutional detector of artifact-tainted image rows.

A small stride-stack backbone yields a 17x17 feature grid; a 1x1
convolution maps it to two classes, a column-fusion maximum over the width
gives one logit pair per grid row, and a softmax turns those into per-row
artifact probabilities. Scores export in the scanner pipeline's CSV format.
"""

from .config import ArtinetConfig
from .data import load_examples, preprocess, project_row_labels, read_corpus_manifest
from .export import export_scores
from .lopo import run_lopo
from .model import ArtiNet, ColumnFusionHead
from .train import load_checkpoint, save_checkpoint, train, train_corpus

__version__ = "0.1.0"

__all__ = [
    "ArtiNet", "ArtinetConfig", "ColumnFusionHead", "export_scores",
    "load_checkpoint", "load_examples", "preprocess", "project_row_labels",
    "read_corpus_manifest", "run_lopo", "save_checkpoint", "train",
    "train_corpus",
]
