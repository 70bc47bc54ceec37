"""AST-path encoder / attention decoder for commit message generation."""

from .batching import PathBatch, make_batch
from .decode import beam_search, greedy_decode
from .model import Ast2Seq, Encoded, ModelConfig, lstm_cell
from .train import (EarlyStopping, Example, TrainReport, dataset_loss, generate, load_model,
                    save_model, train)

__all__ = ["PathBatch", "make_batch", "beam_search", "greedy_decode", "Ast2Seq", "Encoded",
           "ModelConfig", "lstm_cell", "EarlyStopping", "Example", "TrainReport", "dataset_loss",
           "generate", "load_model", "save_model", "train"]
