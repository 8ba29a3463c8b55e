"""Degradation-aware battery arbitrage with linear and single-particle cell models."""

from .errors import CellFault, DataError, SocLimitError
from .linear_cell import LinearCellParams, LinearCellState, linear_step
from .market import PricePeriodSeries, load_prices, price_at, save_prices, synthesize_prices

__version__ = "0.1.0"
