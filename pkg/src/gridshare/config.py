"""Run configuration: a JSON document parsed into :class:`RunConfig`.

Relative paths inside the document resolve against the document's folder.
The README documents every key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .billing import DEFAULT_TARIFF, Tariff
from .errors import ValidationError
from .percolation import PercolationConfig, default_grid
from .profiles import PeriodSpec, SynthParams

TOP_LEVEL_KEYS = {
    "seed", "out", "input", "period", "tariff", "include_amortization", "correlation", "percolation",
    "feeder", "microgrid", "visibility_series", "savings_denominator",
}


@dataclass(frozen=True)
class InputConfig:
    source: str = "synth"
    intervals: Path | None = None
    assets: Path | None = None
    n_houses: int = 340
    days: int = 365
    params: SynthParams = field(default_factory=SynthParams)


@dataclass(frozen=True)
class FeederConfig:
    asset: str = "builtin:ieee123"
    switch_config: str | None = "fig4"
    enumerate: bool = False
    max_partitions: int | None = 1000
    self_sufficiency_fraction: float | None = None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 7
    out: Path = Path("out")
    input: InputConfig = field(default_factory=InputConfig)
    period: PeriodSpec = field(default_factory=PeriodSpec)
    tariff: Tariff = DEFAULT_TARIFF
    include_amortization: bool = False
    correlation_threshold: float = 0.7
    abs_correlation: bool = True
    percolation: PercolationConfig = field(default_factory=PercolationConfig)
    feeder: FeederConfig = field(default_factory=FeederConfig)
    microgrid: str = "auto"
    visibility_series: str = "interval"
    savings_denominator: str = "without_sharing"

    def with_overrides(self, seed: int | None = None, out=None) -> RunConfig:
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed, percolation=replace(cfg.percolation, seed=seed))
        if out is not None:
            cfg = replace(cfg, out=Path(out))
        return cfg


def _section(doc: dict, key: str, allowed: set[str]) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ValidationError(f"config section {key!r} must be an object")
    unknown = set(value) - allowed
    if unknown:
        raise ValidationError(f"unknown keys in {key!r}: {sorted(unknown)}")
    return value


def parse_config(doc: dict, base: Path = Path(".")) -> RunConfig:
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    unknown = set(doc) - TOP_LEVEL_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")

    def path(value):
        return None if value is None else (base / value)

    seed = doc.get("seed", 7)
    if not isinstance(seed, int) or seed < 0:
        raise ValidationError("seed must be a non-negative integer")

    inp = _section(doc, "input", {"source", "intervals", "assets", "n_houses", "days", "params"})
    source = inp.get("source", "synth")
    if source not in ("synth", "csv"):
        raise ValidationError("input.source must be synth or csv")
    input_cfg = InputConfig(
        source=source,
        intervals=path(inp.get("intervals")),
        assets=path(inp.get("assets")),
        n_houses=int(inp.get("n_houses", 340)),
        days=int(inp.get("days", 365)),
        params=SynthParams.from_dict(inp.get("params", {})),
    )
    if source == "csv" and (input_cfg.intervals is None or input_cfg.assets is None):
        raise ValidationError("input.source=csv needs both input.intervals and input.assets")

    period = PeriodSpec(**_section(doc, "period", {"peak_start_hour", "peak_end_hour"}))
    tariff_doc = _section(doc, "tariff", {"lambda_h", "lambda_l", "mu_h", "mu_l", "lambda_b", "lambda_a",
                                          "overrides"})
    tariff = Tariff.from_dict(tariff_doc) if tariff_doc else DEFAULT_TARIFF

    corr = _section(doc, "correlation", {"threshold", "abs_correlation"})
    threshold = float(corr.get("threshold", 0.7))
    if not 0 <= threshold <= 1:
        raise ValidationError("correlation.threshold must lie in [0, 1]")

    perc = _section(doc, "percolation", {"realizations", "grid_points", "normalization", "cluster_statistic"})
    percolation = PercolationConfig(
        realizations=int(perc.get("realizations", 200)),
        p_grid=default_grid(int(perc.get("grid_points", 41))),
        seed=seed,
        normalization=perc.get("normalization", "standard"),
        cluster_statistic=perc.get("cluster_statistic", "largest"),
    )

    fd = _section(doc, "feeder", {"asset", "switch_config", "enumerate", "max_partitions",
                                  "self_sufficiency_fraction"})
    asset = fd.get("asset", "builtin:ieee123")
    if not str(asset).startswith("builtin:"):
        asset = str(base / asset)
    feeder = FeederConfig(
        asset=asset,
        switch_config=fd.get("switch_config", "fig4"),
        enumerate=bool(fd.get("enumerate", False)),
        max_partitions=fd.get("max_partitions", 1000),
        self_sufficiency_fraction=fd.get("self_sufficiency_fraction"),
    )

    series = doc.get("visibility_series", "interval")
    if series not in ("interval", "period"):
        raise ValidationError("visibility_series must be interval or period")
    denominator = doc.get("savings_denominator", "without_sharing")
    if denominator not in ("without_sharing", "without_der"):
        raise ValidationError("savings_denominator must be without_sharing or without_der")
    microgrid = doc.get("microgrid", "auto")
    if not isinstance(microgrid, str):
        raise ValidationError("microgrid must be 'auto' or a block label such as 'MG-III'")

    return RunConfig(
        seed=seed,
        out=base / doc.get("out", "out"),
        input=input_cfg,
        period=period,
        tariff=tariff,
        include_amortization=bool(doc.get("include_amortization", False)),
        correlation_threshold=threshold,
        abs_correlation=bool(corr.get("abs_correlation", True)),
        percolation=percolation,
        feeder=feeder,
        microgrid=microgrid,
        visibility_series=series,
        savings_denominator=denominator,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(doc, path.parent)
