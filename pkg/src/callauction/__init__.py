"""Opening call auction order flow: statistics, clearing, long memory,
size distributions and residual-book shape."""

from .auction import AuctionBatch, ClearingResult, LOBSnapshot, build_batch, clear, price_level, residual_book
from .dfa import crossover_fit, daily_hurst, fluctuation_function, hurst
from .distfit import DistParams, EmpiricalPDF, Family, FitResult, empirical_pdf, fit, pdf_eval, qgamma_norm, rank
from .flowio import DataError, OrderFlow, parse_orderflow, serialize_orderflow
from .lobshape import average_profiles, exp_decay_fit, periodic_peaks
from .orderflow import (
    Action,
    DayContext,
    FlowStats,
    InvalidInput,
    OrderEvent,
    Side,
    clustering_spikes,
    flow_stats,
    relative_price,
    relative_price_pdf,
    size_histogram,
)
from .pipeline import PipelineConfig, run_pipeline
from .synth import SynthConfig, synth_flow

__version__ = "0.1.0"
