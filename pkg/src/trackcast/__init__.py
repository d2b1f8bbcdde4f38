"""trackcast: vertical-alignment forecasting with a 1D ConvLSTM.

The package bundles a small float64 autodiff core, recurrent cells
(ConvLSTM with peepholes, pointwise LSTM/GRU baselines), an exogenous
embedding front end, a track degradation simulator, evaluation metrics,
and a CLI that ties them into reproducible experiment runs.
"""

__version__ = "0.1.0"
