"""
Report Generation Module - Markdown summary of stored analysis results

This module renders the JSON envelopes written by the analysis runner into a
single markdown document using Jinja2 templates. It reads stored values
only; nothing is recomputed here.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from jinja2 import Environment, FileSystemLoader

from .config import flatten
from .models import AnalysisEnvelope, RunConfig
from .tasks import ANALYSES_DIR, CATALOGUE_SUMMARY, read_envelope

logger = logging.getLogger(__name__)

# Template directory
TEMPLATE_DIR = Path(__file__).parent / "templates"
REPORT_TEMPLATE = "report.md.j2"
REPORT_FILE = "report.md"
GROUND_TRUTH_FILE = "ground_truth.json"

REPORTED_ANALYSES = [CATALOGUE_SUMMARY, "excess", "polarisation", "occupancy", "fine", "mechanism",
                     "eclipse", "thermal"]


def format_number(value: Any, digits: int = 3) -> str:
    """Fixed-point text; null and non-finite values print as n/a."""
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value):
            return "n/a"
        if isinstance(value, int):
            return str(value)
        return f"{value:.{digits}f}"
    return str(value)


def format_p(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    if value == 0:
        return "0"
    return f"{value:.1e}" if value < 1e-3 else f"{value:.3f}"


def format_log_p(log10_p: Optional[float]) -> str:
    """p-value from its base-10 logarithm, for values below float range."""
    if log10_p is None:
        return "n/a"
    if log10_p > -3:
        return f"{10 ** log10_p:.3f}"
    exponent = math.floor(log10_p)
    return f"{10 ** (log10_p - exponent):.1f}e{exponent}"


class ReportRenderer:
    """Markdown report renderer using Jinja2."""

    def __init__(self, template_dir: Path = TEMPLATE_DIR):
        self.jinja_env = Environment(
            loader=FileSystemLoader(template_dir),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.jinja_env.filters["num"] = format_number
        self.jinja_env.filters["p"] = format_p
        self.jinja_env.filters["logp"] = format_log_p

    def load_inputs(self, out_dir: Path, ground_truth: Optional[Path] = None
                    ) -> Tuple[Dict[str, AnalysisEnvelope], Optional[Dict], List[str]]:
        """Read every stored envelope and the optional ground truth; list what is missing."""
        analyses_dir = out_dir / ANALYSES_DIR
        envelopes: Dict[str, AnalysisEnvelope] = {}
        warnings: List[str] = []
        for name in REPORTED_ANALYSES:
            path = analyses_dir / f"{name}.json"
            if not path.is_file():
                warnings.append(f"Missing input: {path}")
                continue
            try:
                envelopes[name] = read_envelope(path)
            except ValueError as exc:
                warnings.append(f"Unreadable input {path}: {exc}")

        truth = None
        truth_path = ground_truth or out_dir / GROUND_TRUTH_FILE
        if truth_path.is_file():
            truth = json.loads(truth_path.read_text())
        elif ground_truth is not None:
            warnings.append(f"Missing ground truth: {truth_path}")

        for warning in warnings:
            logger.warning(warning)
        return envelopes, truth, warnings

    def prepare_template_data(self, envelopes: Dict[str, AnalysisEnvelope], truth: Optional[Dict],
                              warnings: List[str]) -> Dict[str, Any]:
        """Select the stored values each table shows."""
        results = {name: env.result for name, env in envelopes.items()}
        first = next(iter(envelopes.values()), None)
        config_lines = []
        if first is not None:
            config_lines = [f"{k}: {json.dumps(v)}" for k, v in sorted(flatten(first.config).items())]

        return {
            "warnings": warnings,
            "seeds": {name: env.master_seed for name, env in envelopes.items()},
            "config_lines": config_lines,
            "catalogue": results.get(CATALOGUE_SUMMARY),
            "excess": results.get("excess"),
            "polarisation": results.get("polarisation"),
            "occupancy": results.get("occupancy"),
            "fine": results.get("fine"),
            "mechanism": results.get("mechanism"),
            "eclipse": results.get("eclipse"),
            "thermal": results.get("thermal"),
            "truth": truth,
            "effect_sizes": effect_size_rows(results, truth),
        }

    def render(self, out_dir: Path, ground_truth: Optional[Path] = None) -> Tuple[str, List[str]]:
        envelopes, truth, warnings = self.load_inputs(out_dir, ground_truth)
        template = self.jinja_env.get_template(REPORT_TEMPLATE)
        return template.render(**self.prepare_template_data(envelopes, truth, warnings)), warnings

    def write(self, out_dir: Path, ground_truth: Optional[Path] = None) -> Tuple[Path, List[str]]:
        text, warnings = self.render(out_dir, ground_truth)
        path = out_dir / REPORT_FILE
        out_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        logger.info(f"Wrote report {path} ({len(warnings)} warnings)")
        return path, warnings


def _interval_row(quantity: str, ratio: Optional[Dict], truth: Any = None) -> Optional[Dict]:
    if not ratio:
        return None
    return {"quantity": quantity, "estimate": ratio.get("estimate"), "low": ratio.get("ci_low"),
            "high": ratio.get("ci_high"), "truth": truth}


def effect_size_rows(results: Dict[str, Dict], truth: Optional[Dict]) -> List[Dict]:
    """Headline point estimates with their stored intervals and, when known, the injected value."""
    truth = truth or {}
    eclipse_truth = truth.get("eclipse_ratio", {})
    rows: List[Optional[Dict]] = []

    excess = results.get("excess")
    if excess:
        rows.append(_interval_row("DTC / Ku-only S_norm (per-satellite medians)", excess["ratio"],
                                  truth.get("excess_ratio")))
        rows.append({"quantity": "Cliff's delta (per-satellite medians)", "estimate": excess["mwu"]["cliffs_delta"],
                     "low": None, "high": None, "truth": None})

    polarisation = results.get("polarisation")
    if polarisation and polarisation["primary"]["channels"]:
        channels = polarisation["primary"]["channels"]
        largest = max(channels, key=lambda c: abs(c["deviation"] or 0.0))
        xx_truth = truth.get("polarisation_xx", {}).get(f"{largest['freq_mhz']:.5f}")
        rows.append({"quantity": f"XX fraction at {largest['freq_mhz']:.3f} MHz", "estimate": largest["f_xx"],
                     "low": largest["wilson_low"], "high": largest["wilson_high"], "truth": xx_truth})

    fine = results.get("fine")
    if fine:
        scan = fine["scan"]
        rows.append({"quantity": f"Fine bin {scan['target_index']} z ({scan['coarse_freq']:.3f} MHz)",
                     "estimate": scan["z_target"], "low": None, "high": None,
                     "truth": "injected" if truth.get("injector") else ("none" if truth else None)})

    mechanism = results.get("mechanism")
    if mechanism:
        if mechanism.get("t2"):
            rows.append({"quantity": "T2 target-bin z (bright detections)", "estimate": mechanism["t2"]["z_target"],
                         "low": None, "high": None, "truth": None})
        if mechanism.get("t3"):
            rows.append({"quantity": "T3 top-decile / bottom-half ratio",
                         "estimate": mechanism["t3"]["top_bottom_ratio"], "low": None, "high": None, "truth": None})

    eclipse = results.get("eclipse")
    if eclipse:
        for name, population in eclipse["populations"].items():
            if name == "Pooled":
                continue
            rows.append(_interval_row(f"Illuminated / eclipsed, {name} (detections)", population["detection"],
                                      eclipse_truth.get(name)))
            rows.append(_interval_row(f"Illuminated / eclipsed, {name} (satellites)", population["satellite"],
                                      eclipse_truth.get(name)))
        if eclipse.get("interaction"):
            rows.append(_interval_row("Interaction: ratio of ratios DTC / Ku-only",
                                      eclipse["interaction"]["ratio_of_ratios"]))
    return [row for row in rows if row is not None]


# Global report renderer instance
report_renderer = None


def get_report_renderer() -> ReportRenderer:
    """Get or create the global report renderer instance."""
    global report_renderer
    if report_renderer is None:
        report_renderer = ReportRenderer()
    return report_renderer
