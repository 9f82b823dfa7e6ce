"""Experiment orchestration: config files, runs, reports, checkpoints.

Configs are INI-style text with a strict per-mode schema; unknown sections
or keys are rejected rather than ignored, and the fully resolved config is
echoed next to the outputs (the echo is itself a valid config reproducing
the run).  Norm series land as tab-separated text, verdicts as a
fixed-format report, fields as binary checkpoints.

Exit codes: 0 all verdicts pass, 1 verdict failure, 2 config error,
3 runtime instability (partial outputs are flushed first).

Randomness flows from one root seed through named streams, so e.g. adding
a norm request never perturbs the generated initial data.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import analysis, linear, norms, solver, spectral
from .analysis import AnalysisConfig, NormSeries, TrustWindow, Verdict, fit_decay
from .norms import BumpProfile, NormSpec
from .solver import RunNormRequest, SolverError

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "run_experiment",
    "norm_table",
    "parse_norm_spec",
    "main",
    "EXIT_OK",
    "EXIT_VERDICT_FAIL",
    "EXIT_CONFIG_ERROR",
    "EXIT_RUNTIME_ERROR",
]

EXIT_OK = 0
EXIT_VERDICT_FAIL = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

MODES = ("linear-decay", "nonlinear-run", "norm-suite", "inequality-suite")


class ConfigError(ValueError):
    """Schema violation in an experiment config."""


# allowed keys per section; a mode lists the sections it accepts
_SCHEMA: dict[str, dict[str, set[str]]] = {
    "linear-decay": {
        "experiment": {"mode", "seed", "output_dir"},
        "profile": {"family", "sigma", "cutoff", "width", "branch", "component"},
        "decay": {"data_class", "derivative_orders", "quantity",
                  "t_start", "t_end", "n_times", "tolerance"},
    },
    "nonlinear-run": {
        "experiment": {"mode", "seed", "output_dir"},
        "grid": {"n_points", "box_length"},
        "initial": {"family", "amplitude", "amplitude2", "width", "sigma", "cutoff",
                    "center_offset", "velocity_amplitude", "charge_balance",
                    "zero_mean"},
        "solver": {"dt", "t_end", "cfl_number", "output_cadence", "gamma",
                   "diagnostic_orders"},
        "norms": {"series"},
        "monitor": {"negative_norms", "data_radius", "margin"},
    },
    "norm-suite": {
        "experiment": {"mode", "seed", "output_dir"},
        "grid": {"n_points", "box_length"},
        "suite": {"n_fields", "band_limit", "l_values", "s_values",
                  "hls_grid", "hls_pairs"},
    },
    "inequality-suite": {
        "experiment": {"mode", "seed", "output_dir"},
        "grid": {"n_points", "box_length"},
        "initial": {"amplitude", "width", "velocity_amplitude"},
        "solver": {"dt", "t_end", "cfl_number", "output_cadence", "gamma",
                   "diagnostic_orders"},
        "suite": {"amplitude_factors", "linear_amplitude", "scaling_slack",
                  "linear_ratio_bound"},
    },
}


@dataclass
class ExperimentConfig:
    """A schema-checked experiment description."""

    mode: str
    seed: int
    output_dir: Path
    sections: dict[str, dict[str, str]] = dc_field(default_factory=dict)

    def get(self, section: str, key: str, default=None) -> str | None:
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> str:
        val = self.get(section, key)
        if val is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return val

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found or unreadable: {path}")
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
        if "experiment" not in sections:
            raise ConfigError("config needs an [experiment] section")
        mode = sections["experiment"].get("mode")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        schema = _SCHEMA[mode]
        for sec, keys in sections.items():
            if sec not in schema:
                raise ConfigError(f"section [{sec}] not allowed for mode {mode}")
            for key in keys:
                if key not in schema[sec]:
                    raise ConfigError(f"unknown key {key!r} in section [{sec}]")
        seed = int(sections["experiment"].get("seed", "0"))
        outdir = Path(sections["experiment"].get("output_dir", "epdecay-out"))
        return cls(mode=mode, seed=seed, output_dir=outdir, sections=sections)

    def echo_text(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for sec in _SCHEMA[self.mode]:
            if sec in self.sections and self.sections[sec]:
                parser[sec] = dict(self.sections[sec])
        parser["experiment"]["mode"] = self.mode
        parser["experiment"]["seed"] = str(self.seed)
        parser["experiment"]["output_dir"] = str(self.output_dir)
        buf = []

        class _W:
            def write(self, text):
                buf.append(text)

        parser.write(_W())
        return "".join(buf)


# ---------------------------------------------------------------------------
# norm spec strings: "lp:2", "hdot:-0.5", "besov:0.5", "h:3", "lp:2:l=1"
# ---------------------------------------------------------------------------

_KIND_ALIASES = {"lp": "lp", "h": "sobolev", "hdot": "hom_sobolev", "besov": "besov_neg"}


def parse_norm_spec(text: str) -> NormSpec:
    parts = [p.strip() for p in text.split(":")]
    if len(parts) < 2:
        raise ConfigError(f"norm spec needs kind:param, got {text!r}")
    kind = _KIND_ALIASES.get(parts[0].lower())
    if kind is None:
        raise ConfigError(f"unknown norm kind {parts[0]!r} in {text!r}")
    param = math.inf if parts[1].lower() in ("inf", "infinity") else float(parts[1])
    order = 0
    for extra in parts[2:]:
        if extra.startswith("l="):
            order = int(extra[2:])
        else:
            raise ConfigError(f"unknown norm spec option {extra!r} in {text!r}")
    try:
        return NormSpec(kind, param, order)
    except norms.NormDomainError as exc:
        raise ConfigError(f"invalid norm spec {text!r}: {exc}") from exc


def _parse_run_request(text: str) -> RunNormRequest:
    quantity, _, rest = text.strip().partition(":")
    if not rest:
        raise ConfigError(f"run norm needs quantity:kind:param, got {text!r}")
    try:
        return RunNormRequest(quantity=quantity, spec=parse_norm_spec(rest))
    except spectral.SpectralError as exc:
        raise ConfigError(str(exc)) from exc


def _floats(text: str) -> list[float]:
    return [float(p) for p in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(p) for p in text.replace(",", " ").split()]


def _parse_data_class(text: str) -> tuple[str, float]:
    kind, _, val = text.partition(":")
    kind = kind.strip()
    if kind not in ("neg_sobolev", "lp"):
        raise ConfigError(f"data_class must be neg_sobolev:<s> or lp:<p>, got {text!r}")
    return kind, float(val)


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------

def _write_series(outdir: Path, series: NormSeries) -> Path:
    safe = series.label.replace(":", "_").replace("/", "_")
    path = outdir / f"series_{safe}.tsv"
    with open(path, "w") as fh:
        fh.write(f"# epdecay norm series: {series.label}\n")
        fh.write(f"# source: {series.source}\n")
        fh.write("# t\tvalue\n")
        for t, v in zip(series.times, series.values):
            fh.write(f"{float(t)!r}\t{float(v)!r}\n")
    return path


def _write_report(outdir: Path, verdicts: list[Verdict]) -> Path:
    path = outdir / "report.txt"
    with open(path, "w") as fh:
        fh.write("# epdecay verdict report\n")
        fh.write("# quantity | predicted | measured | tolerance | window | status | detail\n")
        for v in verdicts:
            fh.write(
                f"{v.quantity} | {float(v.predicted)!r} | {float(v.measured)!r} | "
                f"{float(v.tolerance)!r} | "
                f"[{v.window[0]:g}, {v.window[1]:g}] | {v.status} | {v.detail}\n"
            )
    return path


def _echo_config(outdir: Path, cfg: ExperimentConfig) -> None:
    (outdir / "config-echo.cfg").write_text(cfg.echo_text())


# ---------------------------------------------------------------------------
# experiment modes
# ---------------------------------------------------------------------------

def _linear_decay(cfg: ExperimentConfig, outdir: Path) -> list[Verdict]:
    family = cfg.get("profile", "family", "powerlaw")
    branch = cfg.get("profile", "branch", "sum")
    component = cfg.get("profile", "component", "density")
    if family == "powerlaw":
        profile = linear.SpectralProfile.powerlaw(
            float(cfg.require("profile", "sigma")),
            float(cfg.get("profile", "cutoff", "0.5")),
        )
    elif family == "gaussian":
        profile = linear.SpectralProfile.gaussian(float(cfg.require("profile", "width")))
    else:
        raise ConfigError(f"unknown profile family {family!r}")
    data_class = _parse_data_class(cfg.get("decay", "data_class", "neg_sobolev:1.5"))
    orders = _ints(cfg.get("decay", "derivative_orders", "0 1 2"))
    quantity = cfg.get("decay", "quantity", "carrier")
    t0 = float(cfg.get("decay", "t_start", "100.0"))
    t1 = float(cfg.get("decay", "t_end", "10000.0"))
    n_t = int(cfg.get("decay", "n_times", "17"))
    tol = cfg.get("decay", "tolerance")
    acfg = AnalysisConfig() if tol is None else AnalysisConfig(tol_linear=float(tol))
    times = np.geomspace(t0, t1, n_t)
    verdicts = []
    for l in orders:
        spec = NormSpec("lp", 2.0, derivative_order=l)
        series = linear.norm_evolution(profile, branch, spec, times, component=component)
        _write_series(outdir, series)
        fit = fit_decay(series, (t0, t1), config=acfg)
        verdicts.append(analysis.compare_to_prediction(
            fit, l, data_class, quantity, source="linear", config=acfg))
    return verdicts


def _build_solver_config(cfg: ExperimentConfig, grid: spectral.Grid) -> solver.SolverConfig:
    dt_text = cfg.get("solver", "dt", "auto")
    return solver.SolverConfig(
        grid=grid,
        pressure=solver.PressureLaw(float(cfg.get("solver", "gamma", str(5.0 / 3.0)))),
        dt="auto" if dt_text == "auto" else float(dt_text),
        t_end=float(cfg.get("solver", "t_end", "1.0")),
        cfl_number=float(cfg.get("solver", "cfl_number", "0.3")),
        diagnostic_orders=tuple(_ints(cfg.get("solver", "diagnostic_orders", "0 1 2"))),
        output_cadence=float(cfg.get("solver", "output_cadence", "0.5")),
    )


def _nonlinear_run(cfg: ExperimentConfig, outdir: Path) -> list[Verdict]:
    grid = spectral.Grid(
        int(cfg.require("grid", "n_points")),
        float(cfg.get("grid", "box_length", str(2.0 * math.pi))),
    )
    family = cfg.get("initial", "family", "gaussian_bump")
    params: dict = {"seed": cfg.seed}
    for key in ("amplitude", "amplitude2", "width", "sigma", "cutoff",
                "velocity_amplitude"):
        val = cfg.get("initial", key)
        if val is not None:
            params[key] = float(val)
    balance = cfg.get("initial", "charge_balance")
    if balance is not None:
        params["charge_balance"] = balance
    if cfg.get("initial", "zero_mean", "false").lower() in ("true", "1", "yes"):
        params["zero_mean"] = True
    off = cfg.get("initial", "center_offset")
    if off is not None:
        mid = grid.box_length / 2.0
        params["center"] = (mid, mid, mid)
        params["center2"] = (mid + float(off), mid, mid)
    initial = solver.make_initial(family, params, grid)
    scfg = _build_solver_config(cfg, grid)
    requests = [
        _parse_run_request(tok)
        for tok in cfg.get("norms", "series", "disparity:lp:2").split(",")
        if tok.strip()
    ]
    if not requests:
        raise ConfigError("norm series list is empty")
    try:
        result = solver.run(initial, scfg, requests)
    except SolverError as err:
        if err.partial is not None:
            for series in err.partial.series.values():
                _write_series(outdir, series)
        (outdir / "report.txt").write_text(f"# run aborted: {err}\n")
        raise
    for series in result.series.values():
        _write_series(outdir, series)
    if result.final_state is not None:
        solver.save_checkpoint(outdir / "final_state.npz", result.final_state,
                               cfg.echo_text())

    verdicts: list[Verdict] = []
    rows = solver.energy_inequality_report(result.diagnostics)
    for row in rows:
        verdicts.append(Verdict(
            quantity=f"energy-inequality k={row.k}",
            passed=row.lyapunov_pass and row.identity_pass,
            predicted=solver.LYAPUNOV_K,
            measured=row.max_ratio_over_delta,
            tolerance=row.identity_max_err,
            window=(result.diagnostics[0].t, result.diagnostics[-1].t),
            detail=f"cross C={row.cross_bound:.3g}",
        ))
    mon_text = cfg.get("monitor", "negative_norms")
    if mon_text:
        radius = float(cfg.get("monitor", "data_radius",
                               str(4.0 * float(cfg.get("initial", "width", "1.0")))))
        margin = float(cfg.get("monitor", "margin", "0.5"))
        window = TrustWindow(grid.box_length, radius, margin)
        wanted = [ _parse_run_request(tok).label
                   for tok in mon_text.split(",") if tok.strip() ]
        series_map = {lbl: result.series[lbl] for lbl in wanted if lbl in result.series}
        missing = [lbl for lbl in wanted if lbl not in result.series]
        if missing:
            raise ConfigError(f"monitored norms not among sampled series: {missing}")
        verdicts.extend(analysis.negative_norm_monitor(series_map, window.t_wrap))
    return verdicts


def _norm_suite(cfg: ExperimentConfig, outdir: Path) -> list[Verdict]:
    grid = spectral.Grid(
        int(cfg.get("grid", "n_points", "16")),
        float(cfg.get("grid", "box_length", str(2.0 * math.pi))),
    )
    n_fields = int(cfg.get("suite", "n_fields", "1000"))
    band = int(cfg.get("suite", "band_limit", str(grid.n_points // 3)))
    l_values = _ints(cfg.get("suite", "l_values", "0 1 2"))
    s_values = _floats(cfg.get("suite", "s_values", "0 0.5 1 1.5"))
    rng = solver.named_stream(cfg.seed, "norm-suite")
    verdicts = []

    part = norms.BesovPartition(grid)
    defect = part.partition_defect()
    verdicts.append(Verdict(
        quantity="besov partition of unity", passed=defect <= 1e-10,
        predicted=0.0, measured=defect, tolerance=1e-10, window=(0.0, 0.0)))

    worst = 0.0
    fields = _random_band_limited(grid, rng, n_fields, band)
    for f in fields:
        for l in l_values:
            for s in s_values:
                worst = max(worst, norms.check_neg_sobolev_interpolation(f, l, s))
    verdicts.append(Verdict(
        quantity=f"neg-Sobolev interpolation sweep ({n_fields} fields)",
        passed=worst <= 1.0 + 1e-10, predicted=1.0, measured=worst,
        tolerance=1e-10, window=(0.0, 0.0)))

    pairs_text = cfg.get("suite", "hls_pairs", "1.5:2 1.2:1")
    hls_n = int(cfg.get("suite", "hls_grid", "128"))
    hls_grid = spectral.Grid(hls_n, 2.0 * math.pi)
    for tok in pairs_text.split():
        p_str, m_str = tok.split(":")
        p, moments = float(p_str), int(m_str)
        prof = BumpProfile(width=hls_grid.box_length / 24.0, moments=moments)
        ratios, used = norms.check_hls_embedding(prof, p, (1.0, 2.0), hls_grid)
        spread = (max(ratios) - min(ratios)) / max(ratios) if len(ratios) >= 2 else math.inf
        verdicts.append(Verdict(
            quantity=f"HLS dilation invariance p={p:g}",
            passed=spread <= 1e-6, predicted=0.0, measured=spread,
            tolerance=1e-6, window=(min(used, default=0), max(used, default=0)),
            detail=f"{len(used)} resolved dilations"))
    return verdicts


def _random_band_limited(grid: spectral.Grid, rng: np.random.Generator,
                         count: int, band: int) -> list[spectral.SpectralField]:
    """Zero-mean Hermitian fields supported on |k|_inf <= band."""
    mask = np.ones(grid.shape, dtype=bool)
    cut = band * 2.0 * np.pi / grid.box_length
    x1, x2, x3 = grid.wavenumbers
    mask &= (np.abs(x1) <= cut + 1e-12) & (np.abs(x2) <= cut + 1e-12) & (np.abs(x3) <= cut + 1e-12)
    mask[0, 0, 0] = False
    fields = []
    for _ in range(count):
        w = rng.standard_normal(grid.shape)
        F = spectral.to_spectral(spectral.RealField(grid, w))
        fields.append(spectral.SpectralField(grid, F.coefficients * mask))
    return fields


def _inequality_suite(cfg: ExperimentConfig, outdir: Path) -> list[Verdict]:
    grid = spectral.Grid(
        int(cfg.get("grid", "n_points", "32")),
        float(cfg.get("grid", "box_length", "100.0")),
    )
    base = float(cfg.get("initial", "amplitude", "1e-3"))
    width = float(cfg.get("initial", "width", str(grid.box_length / 16.0)))
    vamp_rel = float(cfg.get("initial", "velocity_amplitude", "0.5"))
    factors = _floats(cfg.get("suite", "amplitude_factors", "1 2 4"))
    tiny = float(cfg.get("suite", "linear_amplitude", "1e-6"))
    slack = float(cfg.get("suite", "scaling_slack", "1.5"))
    tiny_bound = float(cfg.get("suite", "linear_ratio_bound", "1e-4"))
    scfg = _build_solver_config(cfg, grid)
    mid = grid.box_length / 2.0

    def sweep_ratios(amp: float) -> dict[int, float]:
        initial = solver.make_initial("gaussian_bump", {
            "amplitude": amp, "amplitude2": 0.6 * amp, "width": width,
            "center": (mid, mid, mid), "center2": (mid + width / 2.0, mid, mid),
            "velocity_amplitude": vamp_rel * amp,
        }, grid)
        result = solver.run(initial, scfg)
        rows = solver.energy_inequality_report(result.diagnostics)
        return {row.k: row.max_ratio for row in rows}

    verdicts = []
    ratios = {f: sweep_ratios(base * f) for f in factors}
    for k in sorted(next(iter(ratios.values())).keys()):
        ok = True
        detail = []
        worst = None
        for fa, fb in zip(factors[:-1], factors[1:]):
            expected = fb / fa
            got = ratios[fb][k] / ratios[fa][k] if ratios[fa][k] > 0 else math.inf
            detail.append(f"x{expected:g}: {got:.3g}")
            if worst is None or abs(got - expected) > abs(worst - expected):
                worst = got
            if not (expected / slack <= got <= expected * slack):
                ok = False
        verdicts.append(Verdict(
            quantity=f"ratio_k scaling k={k}", passed=ok,
            predicted=factors[1] / factors[0], measured=worst if worst is not None else 1.0,
            tolerance=slack, window=(0.0, scfg.t_end), detail=", ".join(detail)))
    tiny_ratios = sweep_ratios(tiny)
    for k, r in sorted(tiny_ratios.items()):
        verdicts.append(Verdict(
            quantity=f"linear-regime ratio k={k}", passed=r <= tiny_bound,
            predicted=tiny_bound, measured=r, tolerance=tiny_bound,
            window=(0.0, scfg.t_end)))
    return verdicts


def run_experiment(config_path) -> int:
    """Execute one experiment config; returns the process exit code."""
    try:
        cfg = ExperimentConfig.from_file(config_path)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    _echo_config(outdir, cfg)
    runner = {
        "linear-decay": _linear_decay,
        "nonlinear-run": _nonlinear_run,
        "norm-suite": _norm_suite,
        "inequality-suite": _inequality_suite,
    }[cfg.mode]
    try:
        verdicts = runner(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SolverError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    _write_report(outdir, verdicts)
    for v in verdicts:
        print(f"{v.status}  {v.quantity}: predicted {v.predicted:.6g}, "
              f"measured {v.measured:.6g} (tol {v.tolerance:g}) {v.detail}")
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_VERDICT_FAIL


def norm_table(checkpoint_path, spec_texts, quantities=None) -> list[tuple[str, str, float]]:
    """Norm values of checkpoint quantities, one row per (quantity, spec)."""
    state, _ = solver.load_checkpoint(checkpoint_path)
    quantities = quantities or ("n1", "u1", "n2", "u2", "disparity", "grad_phi")
    rows = []
    for q in quantities:
        for text in spec_texts:
            req = RunNormRequest(quantity=q, spec=parse_norm_spec(text))
            rows.append((q, req.spec.label, solver.evaluate_run_norm(req, state)))
    return rows


def _cmd_run(args) -> int:
    if len(args.config) == 1:
        return run_experiment(args.config[0])
    if args.parallel:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=len(args.config)) as pool:
            codes = list(pool.map(run_experiment, args.config))
    else:
        codes = [run_experiment(path) for path in args.config]
    return max(codes)


def _cmd_norms(args) -> int:
    try:
        rows = norm_table(args.checkpoint, args.spec, args.quantity or None)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    for q, label, value in rows:
        print(f"{q:10s} {label:16s} {value!r}")
    return EXIT_OK


def _cmd_report(args) -> int:
    path = Path(args.directory) / "report.txt"
    if not path.exists():
        print(f"error: no report at {path}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    text = path.read_text()
    print(text, end="")
    failed = any(" FAIL " in line or line.rstrip().endswith("FAIL")
                 or "| FAIL |" in line for line in text.splitlines())
    return EXIT_VERDICT_FAIL if failed else EXIT_OK


def main(argv=None) -> int:
    workers = os.environ.get("EPDECAY_THREADS")
    if workers:
        spectral.fft_workers(int(workers))
    parser = argparse.ArgumentParser(
        prog="epdecay",
        description="Decay-rate laboratory for the damped two-fluid Euler-Poisson system",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one or more experiment configs")
    p_run.add_argument("config", nargs="+")
    p_run.add_argument("--parallel", action="store_true",
                       help="run independent configs in parallel processes")
    p_run.set_defaults(fn=_cmd_run)
    p_norms = sub.add_parser("norms", help="norm table of a checkpoint")
    p_norms.add_argument("checkpoint")
    p_norms.add_argument("--spec", action="append", required=True,
                         help="norm spec, e.g. lp:2 or hdot:-0.5 (repeatable)")
    p_norms.add_argument("--quantity", action="append",
                         help="restrict to a quantity (repeatable)")
    p_norms.set_defaults(fn=_cmd_norms)
    p_rep = sub.add_parser("report", help="print a saved verdict report")
    p_rep.add_argument("directory")
    p_rep.set_defaults(fn=_cmd_report)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
