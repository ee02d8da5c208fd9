"""Block-circulant (structured weight matrix) neural-network inference."""

from swmnet.fft_core import fft, ifft, make_twiddle_table, naive_dft
from swmnet.fixed_point import FixedPointFormat, quantize
from swmnet.lstm import LstmCellParams, LstmState, lstm_cell_step, lstm_sequence_forward
from swmnet.model_io import Model, generate_random_model, load_model, save_model
from swmnet.nn_layers import FcLayer
from swmnet.structured_matrix import (
    BlockCirculantMatrix,
    expand_to_dense,
    from_defining_vectors,
    matvec_direct,
    matvec_fft,
    project_dense_to_circulant,
)

__version__ = "0.1.0"
