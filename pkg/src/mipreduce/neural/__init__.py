"""Multi-label classifiers trained with plain numpy."""
from .layers import Conv1d, Dense, Dropout, Flatten, Layer, MaxPool1d, conv_out_len
from .network import (INPUT_WIDTH, N_LABELS, Network, NetworkSpec, SpecError, ann_spec,
                      cnn_spec)
from .train import (MODEL_FORMAT, Adam, ModelFormatError, TrainConfig, TrainedModel,
                    TrainingDiverged, bce_with_logits_loss, forward, load_model,
                    per_label_bce, predict_probabilities, save_model, train)
