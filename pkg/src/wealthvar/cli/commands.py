"""One function per pipeline stage. Each reads the resolved config, writes CSVs
(plus SVG charts) under the output directory and records them in the manifest."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .. import plotting
from ..bvar import PosteriorDrawSet, VarSpec, convergence_report, gibbs_sample, prepare_data, prior_from_dict
from ..errors import ConfigError, DataError, DependencyError, InsufficientDataError
from ..inequality import InequalityMeasure, build_series
from ..microdata import Month, assign_cohorts, get_concept, load_households
from ..probkernel import RngStream
from ..regimes import (TvarSpec, TvpPriorSpec, spread_scheme, tvar_gibbs, tvar_regime_irf, tvp_gibbs,
                       tvp_spread_counterfactual)
from ..structural import (Condition, CounterfactualSpec, IdentificationScheme, ImpulseResponseSet,
                          ScenarioForecast, bands, channel_counterfactual, conditional_forecast, fevd, identify, irf,
                          level_readout)
from ..structural.results import write_frame
from ..synth import HouseholdGenerator, MacroGenerator, write_synthetic
from .config import PipelineConfig
from .manifest import RunManifest, read_manifest

log = logging.getLogger(__name__)

# Fixed stream ids so each stage's randomness is independent of which stages ran before it.
# The generator uses stream 0 (see synth.write_synthetic).
STREAM_ESTIMATE, STREAM_IDENT, STREAM_TVP, STREAM_TVP_CF, STREAM_TVAR = 2, 3, 5, 6, 7
ESTIMATE_DIR = "estimate"


def _stage(cfg: PipelineConfig, name: str) -> tuple[RunManifest, Path]:
    d = cfg.out / name
    d.mkdir(parents=True, exist_ok=True)
    return RunManifest(name, cfg.out, cfg.hash(), cfg.seed), d


def _write_csv(man: RunManifest, obj, path: Path) -> Path:
    if isinstance(obj, pd.DataFrame):
        write_frame(obj, path)
    else:
        obj.write_csv(path)
    return man.add_output(path)


def _window(pair, what: str):
    if not pair:
        return None
    if len(pair) != 2:
        raise ConfigError(f"{what} must be [start_month, end_month]")
    try:
        return Month.parse(pair[0]), Month.parse(pair[1])
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


# --------------------------------------------------------------------------- synth

def cmd_synth(cfg: PipelineConfig, args) -> None:
    man, d = _stage(cfg, cfg["synth"]["dir"])
    man.stage = "synth"
    try:
        hh = HouseholdGenerator(**cfg["synth"]["households"])
        mc = dict(cfg["synth"]["macro"])
        if "variables" in mc:
            mc["variables"] = tuple(mc["variables"])
        for key in ("coefs", "sigma"):
            if key in mc:
                mc[key] = np.asarray(mc[key], dtype=float)
        macro = MacroGenerator(**mc)
    except TypeError as exc:
        raise ConfigError(f"synth: {exc}") from None
    paths = write_synthetic(d, hh, macro, cfg.seed)
    for p in paths.values():
        man.add_output(p)
    man.stats = {"households": hh.months * hh.per_month, "months": hh.months, "macro_periods": macro.periods}
    man.write()


# --------------------------------------------------------------------------- inequality

def _measures(c: dict) -> list[InequalityMeasure]:
    out = []
    for kind in c["measures"]:
        if kind == "quantile_share":
            out.append(InequalityMeasure(kind, {"band": tuple(c["quantile_band"])}))
        elif kind == "coeff_variation":
            out.append(InequalityMeasure(kind, {"topcode": tuple(c["cv_topcode"])}))
        else:
            out.append(InequalityMeasure(kind))
    return out


def cmd_build_inequality(cfg: PipelineConfig, args) -> None:
    c = cfg["inequality"]
    man, d = _stage(cfg, "inequality")
    path = cfg.households_path()
    if not path.exists():
        raise DataError(f"households file not found: {path}")
    man.add_input(path)
    window = _window(c["window"], "inequality.window")
    records, report = load_households(path, window=window)
    if window is None:
        if not records:
            raise InsufficientDataError(f"no usable households in {path}")
        dates = [r.interview_date for r in records]
        window = (min(dates), max(dates))
    cohorts = assign_cohorts(records, window, int(c["min_cohort_size"]))
    invalid = [str(k.month) for k in cohorts if not k.valid]
    if invalid and not getattr(args, "allow_invalid_cohorts", False):
        raise DataError(f"{len(invalid)} cohort(s) below {c['min_cohort_size']} households: "
                        f"{', '.join(invalid[:12])}{' ...' if len(invalid) > 12 else ''}; "
                        "rerun with --allow-invalid-cohorts to keep them flagged")
    report.to_csv(d / "drops.csv")
    man.add_output(d / "drops.csv")
    _write_csv(man, pd.DataFrame({"month": [str(k.month) for k in cohorts], "size": [k.size for k in cohorts],
                                  "valid": [str(k.valid).lower() for k in cohorts]}), d / "cohorts.csv")
    measures = _measures(c)
    ginis = {}
    for cname in c["concepts"]:
        concept = get_concept(cname)
        for m in measures:
            s = build_series(cohorts, concept, m, int(c["smoothing"]) or None)
            s.to_csv(d / f"{cname}_{m.label}.csv")
            man.add_output(d / f"{cname}_{m.label}.csv")
            if m.kind == "gini":
                ginis[cname] = s.values
            if s.errors:
                log.warning("%s %s: %d month(s) without a value, first: %s", cname, m.label, len(s.errors),
                            s.errors[0])
    if ginis:
        man.add_output(plotting.line_chart(d / "gini.svg", [str(k.month) for k in cohorts], ginis,
                                           title="Gini by wealth concept"))
    man.stats = {"records_read": report.n_read, "records_kept": report.n_kept, "drops": dict(report.drops),
                 "cohorts": len(cohorts), "invalid_cohorts": len(invalid)}
    man.write()


# --------------------------------------------------------------------------- fixed-parameter VAR

def _read_panel(cfg: PipelineConfig, man: RunManifest) -> pd.DataFrame:
    path = cfg.macro_path()
    if not path.exists():
        raise DataError(f"macro panel not found: {path}")
    man.add_input(path)
    panel = pd.read_csv(path, dtype={"month": str})
    if "month" not in panel.columns:
        raise DataError(f"macro panel {path} has no 'month' column")
    panel = panel.set_index("month")
    v = cfg["var"]
    if v["inequality_series"]:
        src = cfg.out / "inequality" / f"{v['inequality_series'].replace('/', '_')}.csv"
        if not src.exists():
            raise DependencyError(f"var.inequality_series needs {src}; run `wealthvar build-inequality` first")
        man.add_input(src)
        s = pd.read_csv(src, dtype={"month": str})
        s = s[s["valid"].astype(str).str.lower() == "true"].set_index("month")["value"]
        panel = panel.drop(columns=[v["inequality_variable"]], errors="ignore").join(
            s.rename(v["inequality_variable"]), how="inner")
    return panel


def _spec(cfg: PipelineConfig, variables=None, lags=None) -> VarSpec:
    v = cfg["var"]
    variables = tuple(variables or v["variables"])
    tr = {k: t for k, t in v["transforms"].items() if k in variables}
    return VarSpec(variables, int(lags or v["lags"]), bool(v["include_constant"]),
                   _window(v["window"], "var.window"), tr)


def _panel_data(spec: VarSpec, panel: pd.DataFrame) -> tuple[np.ndarray, list[str]]:
    data = prepare_data(spec, panel)
    months = [m for m in panel.index if spec.window is None or spec.window[0] <= Month.parse(m) <= spec.window[1]]
    return data, months


def cmd_estimate(cfg: PipelineConfig, args) -> None:
    g = cfg["gibbs"]
    man, d = _stage(cfg, ESTIMATE_DIR)
    spec = _spec(cfg)
    data, months = _panel_data(spec, _read_panel(cfg, man))
    prior = prior_from_dict(cfg["prior"])
    draws = gibbs_sample(spec, prior, data, RngStream(cfg.seed, STREAM_ESTIMATE), int(g["iters"]),
                         int(g["burn_in"]), int(g["thin"]), chains=int(g["chains"]),
                         threads=int(getattr(args, "threads", 1) or 1))
    draws.save(d)
    man.add_output(d / "draws.npz")
    man.add_output(d / "draws_manifest.json")
    _write_csv(man, pd.DataFrame({"month": months}), d / "months.csv")
    if g["export_csv"]:
        _write_csv(man, draws.to_frame(), d / "draws.csv")
    flat = draws.flat()
    names = draws.param_names()
    lo, med, hi = np.percentile(flat, [16, 50, 84], axis=0)
    _write_csv(man, pd.DataFrame({"param": names, "mean": flat.mean(0), "sd": flat.std(0, ddof=1),
                                  "median": med, "lo16": lo, "hi84": hi}), d / "posterior_summary.csv")
    stats = draws.manifest()
    try:
        conv = convergence_report(draws)
        _write_csv(man, conv, d / "convergence.csv")
        stats["max_rhat"] = float(conv["rhat"].max())
        stats["min_ess"] = float(conv["ess"].min())
    except InsufficientDataError as exc:
        log.info("convergence report skipped: %s", exc)
    man.stats = stats
    man.write()


def _load_draws(cfg: PipelineConfig, man: RunManifest, stage: str) -> PosteriorDrawSet:
    d = cfg.out / ESTIMATE_DIR
    if not (d / "draws_manifest.json").exists() or not (d / "draws.npz").exists():
        raise DependencyError(f"`{stage}` needs the posterior draws in {d}/draws.npz and draws_manifest.json; "
                              "run `wealthvar estimate` first")
    man.add_input(d / "draws.npz")
    man.add_input(d / "draws_manifest.json")
    return PosteriorDrawSet.load(d)


def _scheme(cfg: PipelineConfig) -> IdentificationScheme:
    s = dict(cfg["identification"])
    if s.get("ordering") is not None:
        s["ordering"] = tuple(s["ordering"])
    return IdentificationScheme.from_dict(s)


def _panels(resp: ImpulseResponseSet):
    med, lo, hi = resp.summary()
    return [(v, med[:, j], lo[:, j], hi[:, j]) for j, v in enumerate(resp.variables)]


def _ident_stats(ident) -> dict:
    return {"n_draws": int(len(ident.draw_index)), "skipped_draws": int(ident.n_skipped),
            "acceptance_rate": float(ident.acceptance_rate)}


def cmd_irf(cfg: PipelineConfig, args) -> None:
    man, d = _stage(cfg, "irf")
    draws = _load_draws(cfg, man, "irf")
    scheme = _scheme(cfg)
    ident = identify(draws, scheme, RngStream(cfg.seed, STREAM_IDENT))
    H = int(cfg["irf"]["horizon"])
    resp = irf(draws, scheme, H, identification=ident)
    _write_csv(man, resp, d / "irf.csv")
    logged = [v for v, t in draws.spec.transforms.items() if t == "log100"]
    if logged:
        parts = []
        for v in logged:
            level = float(np.exp(draws.data[-1, draws.spec.index(v)] / 100.0))
            med, lo, hi = bands(level_readout(resp, v, level))
            parts.append(pd.DataFrame({"horizon": np.arange(H + 1), "variable": v, "shock": resp.shock,
                                       "median": med, "lo16": lo, "hi84": hi}))
        _write_csv(man, pd.concat(parts, ignore_index=True), d / "irf_original_units.csv")
    man.add_output(plotting.band_panels(d / "irf.svg", np.arange(H + 1), _panels(resp),
                                        title=f"Responses to {resp.shock} shock"))
    man.stats = _ident_stats(ident)
    man.write()


def cmd_fevd(cfg: PipelineConfig, args) -> None:
    man, d = _stage(cfg, "fevd")
    draws = _load_draws(cfg, man, "fevd")
    scheme = _scheme(cfg)
    ident = identify(draws, scheme, RngStream(cfg.seed, STREAM_IDENT))
    H = int(cfg["fevd"]["horizon"])
    res = fevd(draws, scheme, H, identification=ident)
    _write_csv(man, res, d / "fevd.csv")
    shock = ident.shocks[ident.column()]
    panels = []
    for v in res.variables:
        med, lo, hi = bands(res.share(v, shock))
        panels.append((v, med, lo, hi))
    man.add_output(plotting.band_panels(d / "fevd.svg", np.arange(H + 1), panels,
                                        title=f"Variance share of the {shock} shock"))
    man.stats = _ident_stats(ident)
    man.write()


def cmd_counterfactual(cfg: PipelineConfig, args) -> None:
    c = cfg["counterfactual"]
    man, d = _stage(cfg, "counterfactual")
    draws = _load_draws(cfg, man, "counterfactual")
    scheme = _scheme(cfg)
    ident = identify(draws, scheme, RngStream(cfg.seed, STREAM_IDENT))
    H = int(c["horizon"])
    for chans in c["channels"]:
        chans = [chans] if isinstance(chans, str) else list(chans)
        res = channel_counterfactual(draws, scheme, chans, H, identification=ident)
        tag = "no_" + "_".join(chans)
        df = pd.concat([res.unrestricted.to_frame(), res.counterfactual.to_frame()], ignore_index=True)
        _write_csv(man, df, d / f"{tag}.csv")
        base_med = res.unrestricted.median
        man.add_output(plotting.band_panels(
            d / f"{tag}.svg", np.arange(H + 1), _panels(res.counterfactual), title=f"Channel shut: {', '.join(chans)}",
            extra=[("unrestricted", base_med[:, j]) for j in range(len(res.counterfactual.variables))]))
    man.stats = _ident_stats(ident)
    man.write()


def cmd_scenario(cfg: PipelineConfig, args) -> None:
    c = cfg["scenario"]
    man, d = _stage(cfg, "scenario")
    draws = _load_draws(cfg, man, "scenario")
    conds = []
    for i, cd in enumerate(c["conditions"]):
        try:
            conds.append(Condition(cd["variable"], cd.get("values"), cd.get("offset", 0.0)))
        except KeyError:
            raise ConfigError(f"scenario.conditions[{i}] needs a variable") from None
    cf = CounterfactualSpec("conditional_path", int(c["horizon"]), conditions=tuple(conds), name=c["name"])
    res = conditional_forecast(draws, cf)
    uncond = ScenarioForecast(res.unconditional, res.shocks, res.unconditional, res.variables, "unconditional")
    df = pd.concat([res.to_frame(), uncond.to_frame()], ignore_index=True)
    _write_csv(man, df, d / f"{c['name']}.csv")
    H = res.horizon
    umed = bands(res.unconditional)[0]
    med, lo, hi = bands(res.paths)
    panels = [(v, med[:, j], lo[:, j], hi[:, j]) for j, v in enumerate(res.variables)]
    man.add_output(plotting.band_panels(d / f"{c['name']}.svg", np.arange(1, H + 1), panels, title=c["name"],
                                        extra=[("unconditional", umed[:, j]) for j in range(len(res.variables))]))
    man.stats = {"n_draws": int(res.paths.shape[0]), "note": res.metadata["note"]}
    man.write()


# --------------------------------------------------------------------------- nonlinear models

def cmd_tvp(cfg: PipelineConfig, args) -> None:
    c = cfg["tvp"]
    man, d = _stage(cfg, "tvp")
    spec = _spec(cfg, c["variables"], c["lags"])
    data, months = _panel_data(spec, _read_panel(cfg, man))
    try:
        ps = TvpPriorSpec(**c["prior"])
    except TypeError as exc:
        raise ConfigError(f"tvp.prior: {exc}") from None
    draws = tvp_gibbs(spec, data, ps, RngStream(cfg.seed, STREAM_TVP), int(c["iters"]), int(c["burn_in"]),
                      int(c["thin"]))
    r0 = draws.first_period
    est_months = months[r0:r0 + draws.n_periods]
    lo, med, hi = np.percentile(np.sqrt(draws.h), [16, 50, 84], axis=0)
    _write_csv(man, pd.DataFrame({"month": np.repeat(est_months, spec.n),
                                  "variable": np.tile(list(spec.variables), draws.n_periods),
                                  "median": med.ravel(), "lo16": lo.ravel(), "hi84": hi.ravel()}),
               d / "volatility.csv")
    win = _window(c["window"], "tvp.window")
    if win is None:
        start = max(draws.n_periods - int(c["window_periods"]), 0)
        window = (start, draws.n_periods - 1)
    else:
        labels = [Month.parse(m) for m in est_months]
        inside = [i for i, m in enumerate(labels) if win[0] <= m <= win[1]]
        if not inside:
            raise ConfigError(f"tvp.window {c['window']} has no estimation periods")
        window = (inside[0], inside[-1])
    scheme = spread_scheme(spec.variables, c["spread"], c["policy"], c["inflation"], c["output"],
                           int(c["max_tries"]))
    cf = tvp_spread_counterfactual(draws, scheme, window, float(c["delta"]), RngStream(cfg.seed, STREAM_TVP_CF),
                                   months=est_months)
    _write_csv(man, cf, d / "counterfactual.csv")
    lo, med, hi = np.percentile(cf.paths, [16, 50, 84], axis=0)
    panels = [(v, med[:, j], lo[:, j], hi[:, j]) for j, v in enumerate(spec.variables)]
    man.add_output(plotting.band_panels(d / "counterfactual.svg", np.arange(len(cf.periods)), panels,
                                        title="Counterfactual with a higher spread",
                                        extra=[("actual", cf.actual[:, j]) for j in range(spec.n)],
                                        xlabel="period in window"))
    man.stats = {"n_draws": draws.n_draws, "h_acceptance": draws.h_acceptance, "cf_draws": int(cf.paths.shape[0]),
                 "cf_skipped_draws": cf.skipped_draws, "flagged_periods": {str(k): v for k, v in cf.flagged_periods.items()}}
    man.write()


def cmd_tvar(cfg: PipelineConfig, args) -> None:
    c = cfg["tvar"]
    man, d = _stage(cfg, "tvar")
    spec = _spec(cfg, c["variables"], c["lags"])
    data, months = _panel_data(spec, _read_panel(cfg, man))
    ts = TvarSpec(c["threshold_variable"], int(c["delay"]), float(c["tightness"]))
    draws = tvar_gibbs(spec, ts, data, RngStream(cfg.seed, STREAM_TVAR), int(c["iters"]), int(c["burn_in"]),
                       int(c["thin"]))
    scheme = IdentificationScheme("cholesky", c["shock"], shock_size=float(c["shock_size"]))
    r1, r2, timeline = tvar_regime_irf(draws, scheme, int(c["horizon"]), months)
    _write_csv(man, timeline, d / "timeline.csv")
    _write_csv(man, r1, d / "irf_regime1.csv")
    _write_csv(man, r2, d / "irf_regime2.csv")
    _write_csv(man, pd.DataFrame(draws.tuning_trace, columns=["iteration", "acceptance", "step"]),
               d / "tuning.csv")
    med = float(np.median(draws.threshold))
    man.add_output(plotting.line_chart(d / "timeline.svg", list(timeline["month"]),
                                       {"threshold variable (lagged)": timeline["threshold_var_lagged"].to_numpy(),
                                        "median threshold": np.full(len(timeline), med)},
                                       title="Threshold variable and estimated threshold"))
    H = int(c["horizon"])
    m2 = r2.median
    man.add_output(plotting.band_panels(d / "irf_regimes.svg", np.arange(H + 1), _panels(r1),
                                        title="Regime 1 (band) vs regime 2 (dashed)",
                                        extra=[("regime 2", m2[:, j]) for j in range(spec.n)]))
    lo, hi = draws.interval()
    man.stats = {"n_draws": draws.n_draws, "acceptance": draws.acceptance, "step": draws.step,
                 "threshold_median": med, "threshold_68": [lo, hi]}
    man.write()


# --------------------------------------------------------------------------- report

def cmd_report(cfg: PipelineConfig, args) -> None:
    doc = read_manifest(cfg.out)
    if not doc.get("stages"):
        raise DependencyError(f"no manifest in {cfg.out}; run a pipeline stage first")
    man, d = _stage(cfg, "report")
    rows = [(stage, path, digest) for stage, st in sorted(doc["stages"].items()) if stage != "report"
            for path, digest in st["outputs"].items()]
    _write_csv(man, pd.DataFrame(rows, columns=["stage", "path", "sha256"]), d / "outputs.csv")
    lines = ["# Run report", "", f"config hash: `{cfg.hash()}`", f"seed: {cfg.seed}", ""]
    for stage, st in sorted(doc["stages"].items()):
        if stage == "report":
            continue
        lines.append(f"## {stage}")
        lines.append("")
        lines.append(f"- outputs: {len(st['outputs'])}")
        for k, v in sorted(st.get("stats", {}).items()):
            if isinstance(v, (dict, list)) and len(str(v)) > 200:
                continue
            lines.append(f"- {k}: {v}")
        lines.append("")
    irf_path = cfg.out / "irf" / "irf.csv"
    if irf_path.exists():
        df = pd.read_csv(irf_path)
        peak = df.loc[df.groupby("variable")["median"].apply(lambda s: s.abs().idxmax())]
        lines += ["## Peak median responses", "", "| variable | horizon | median | lo16 | hi84 |", "|---|---|---|---|---|"]
        lines += [f"| {r.variable} | {r.horizon} | {r.median:.4g} | {r.lo16:.4g} | {r.hi84:.4g} |"
                  for r in peak.itertuples()]
        lines.append("")
    (d / "summary.md").write_text("\n".join(lines), encoding="utf-8")
    man.add_output(d / "summary.md")
    man.stats = {"stages": sorted(s for s in doc["stages"] if s != "report")}
    man.write()


COMMANDS = {
    "synth": cmd_synth,
    "build-inequality": cmd_build_inequality,
    "estimate": cmd_estimate,
    "irf": cmd_irf,
    "fevd": cmd_fevd,
    "counterfactual": cmd_counterfactual,
    "scenario": cmd_scenario,
    "tvp": cmd_tvp,
    "tvar": cmd_tvar,
    "report": cmd_report,
}
