from .ecdf import Ecdf, ecdf, ks_distance
from .realism import RealismStats, max_consecutive_change, realism_stats
from .report import Thresholds, ValidationReport, build_report

__all__ = ["Ecdf", "ecdf", "ks_distance", "RealismStats", "max_consecutive_change",
           "realism_stats", "Thresholds", "ValidationReport", "build_report"]
