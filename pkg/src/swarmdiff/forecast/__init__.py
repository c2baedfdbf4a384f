from .forecaster import (
    FragmentHistory,
    SeriesForecaster,
    SwarmForecaster,
    altered_permeability,
    blend,
    clamp_stats,
    forecast_mse,
    persistence_forecast,
)
from .rnn import RecurrentPredictor, TrainingDivergedError, load_checkpoint, save_checkpoint
from .wavelet import (
    SeriesTooShortError,
    SwarmSeries,
    WaveletDecomposition,
    build_input_matrix,
    causal_input_matrix,
    wavelet_decompose,
    wavelet_reconstruct,
)
