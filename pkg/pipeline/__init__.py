"""
UEMR Pipeline - Command-line plumbing around uemr_core

Configuration, stored-result envelopes, the analysis registry, the markdown
report and the click entry point.
"""

from .config import ConfigError, load_config, load_synth_spec
from .models import AnalysisEnvelope, RunConfig
from .tasks import ALL_ANALYSES, ANALYSES, run_analyses

__all__ = ["ConfigError", "load_config", "load_synth_spec", "AnalysisEnvelope", "RunConfig",
           "ALL_ANALYSES", "ANALYSES", "run_analyses"]
