"""Pipeline stages: simulate, sample, reconstruct, analyze, report.

Each stage reads the run configuration and the outputs of earlier stages
under one output directory, writes its own files, and records them with
checksums in manifest.json. Fixed seeds make every stage reproducible
file-for-file; wall-clock timings live only in the manifest.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from pathlib import Path

import numpy as np

from . import __version__
from .channels import count_rate_table, herald_subtract, input_state, loss_channel
from .config import CAT_PANELS_MODE, RunConfig, save_config
from .errors import ConfigError, MissingInputError
from .fock import (
    DensityMatrix,
    HilbertConfig,
    cat_state,
    fidelity,
    load_density_matrix,
    mean_photon,
    mixed_coherent,
    save_density_matrix,
)
from .phasespace import (
    QuadGrid,
    coherence_peak,
    marginal_sweep,
    origin_parity,
    rho_quad,
    save_marginal_sweep_csv,
    save_quad_csv,
    save_wigner_csv,
    wigner,
)
from .sampler import load_dataset, save_dataset, synth_dataset
from .tomography import bootstrap, mle_reconstruct

_STAGE_IDS = {"sample": 1, "bootstrap": 2}

# reference event rates (counts/s) the analysis compares against
REFERENCE_RATE_3 = 200.0
REFERENCE_RATE_4 = 1.5


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _stage_seed(seed: int, stage: str, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_STAGE_IDS[stage], int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="ascii")


def _update_manifest(out: Path, cfg: RunConfig, stage: str, files: list[Path], wall: float) -> None:
    manifest_path = out / "manifest.json"
    manifest = None
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="ascii"))
        if manifest.get("config_hash") != cfg.config_hash():
            manifest = None  # a new configuration starts a fresh run record
    if manifest is None:
        manifest = {"version": __version__, "config_hash": cfg.config_hash(), "stages": {}}
    manifest["stages"][stage] = {
        "files": {str(f.relative_to(out)): _sha256(f) for f in sorted(files)},
        "wall_seconds": wall,
    }
    _write_json(manifest, manifest_path)


def _require(out: Path, stage: str, needed: str, cfg: RunConfig | None = None) -> dict:
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise MissingInputError(needed, f"no manifest under {out}; run '{needed}' first")
    manifest = json.loads(manifest_path.read_text(encoding="ascii"))
    if cfg is not None and manifest.get("config_hash") != cfg.config_hash():
        raise ConfigError(
            f"stage '{stage}' was given a different configuration (or seed) than the "
            f"earlier stages recorded under {out}"
        )
    if needed not in manifest.get("stages", {}):
        raise MissingInputError(needed, f"stage '{stage}' needs '{needed}' outputs first")
    return manifest


def state_names(cfg: RunConfig) -> list[str]:
    if cfg.mode == CAT_PANELS_MODE:
        return ["cat_even", "cat_odd", "cat_even_lossy", "cat_mixed"]
    return ["input"] + [f"herald_{n}" for n in range(cfg.experiment.herald_n + 1)]


def _build_states(cfg: RunConfig) -> dict[str, DensityMatrix]:
    if cfg.mode == CAT_PANELS_MODE:
        config = HilbertConfig(cfg.experiment.cutoff)
        alpha = cfg.cat.alpha
        even = cat_state(alpha, "even", config).to_density()
        return {
            "cat_even": even,
            "cat_odd": cat_state(alpha, "odd", config).to_density(),
            "cat_even_lossy": loss_channel(even, 1.0 - cfg.cat.loss),
            "cat_mixed": mixed_coherent(alpha, config),
        }
    states: dict[str, DensityMatrix] = {"input": input_state(cfg.experiment)}
    for n in range(cfg.experiment.herald_n + 1):
        states[f"herald_{n}"] = herald_subtract(cfg.experiment.with_herald(n)).state
    return states


def _write_photon_distribution(rho: DensityMatrix, path: Path) -> None:
    lines = ["n,probability"]
    for n, p in enumerate(rho.diagonal):
        lines.append(f"{n},{float(p)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _write_coherence_profile(rho: DensityMatrix, axis: QuadGrid, path: Path) -> None:
    qdm = rho_quad(rho, math.pi / 2, axis)
    anti = qdm.antidiagonal()
    lines = ["p,re_diag,re_antidiag"]
    for q, d, a in zip(axis.axis, qdm.diagonal, anti):
        lines.append(f"{float(q)!r},{float(d)!r},{float(a)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _write_wigner_xsection(grid, path: Path) -> None:
    j0 = int(np.argmin(np.abs(grid.p_axis)))
    lines = ["x,w"]
    for x, w in zip(grid.x_axis, grid.values[:, j0]):
        lines.append(f"{float(x)!r},{float(w)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def simulate(cfg: RunConfig, out: str | Path) -> list[Path]:
    """Generate every model state with its phase-space exports."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    files: list[Path] = []

    config_path = out / "config.ini"
    save_config(cfg, config_path)
    files.append(config_path)

    g = cfg.grids
    quad_axis = QuadGrid.linspace(g.quad_min, g.quad_max, g.quad_points)
    wx = np.linspace(g.wigner_min, g.wigner_max, g.wigner_points)
    angles = np.arange(-90.0, 90.0 + g.marginal_step_deg / 2, g.marginal_step_deg)

    states = _build_states(cfg)
    for name, rho in states.items():
        d = out / "states" / name
        d.mkdir(parents=True, exist_ok=True)
        save_density_matrix(rho, d / "density_matrix.json")
        _write_photon_distribution(rho, d / "photon_distribution.csv")
        save_quad_csv(rho_quad(rho, math.pi / 2, quad_axis), d / "rho_pp.csv")
        save_quad_csv(rho_quad(rho, 0.0, quad_axis), d / "rho_xx.csv")
        _write_coherence_profile(rho, quad_axis, d / "coherence.csv")
        wg = wigner(rho, wx, wx)
        save_wigner_csv(wg, d / "wigner.csv")
        _write_wigner_xsection(wg, d / "wigner_xsection.csv")
        sweep = marginal_sweep(rho, angles, quad_axis)
        save_marginal_sweep_csv(angles, quad_axis, sweep, d / "marginals.csv")
        files.extend(sorted(d.iterdir()))

    if cfg.mode != CAT_PANELS_MODE:
        table = count_rate_table(cfg.experiment, cfg.experiment.herald_n)
        lines = ["state,mean_photon,herald_probability,rate_cps"]
        lines.append(f"input,{mean_photon(states['input'])!r},,")
        for n, p, rate in table:
            mp = mean_photon(states[f"herald_{n}"])
            lines.append(f"herald_{n},{mp!r},{p!r},{rate!r}")
        rates_path = out / "rates.csv"
        rates_path.write_text("\n".join(lines) + "\n", encoding="ascii")
        files.append(rates_path)

    _update_manifest(out, cfg, "simulate", files, time.perf_counter() - t0)
    return files


def sample(cfg: RunConfig, out: str | Path) -> list[Path]:
    """Draw synthetic homodyne datasets from each simulated state."""
    out = Path(out)
    _require(out, "sample", "simulate", cfg)
    t0 = time.perf_counter()
    files: list[Path] = []
    ds_dir = out / "datasets"
    ds_dir.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(state_names(cfg)):
        dm_path = out / "states" / name / "density_matrix.json"
        if not dm_path.exists():
            raise MissingInputError("simulate", f"state file {dm_path} missing")
        rho = load_density_matrix(dm_path)
        ds = synth_dataset(rho, cfg.plan, _stage_seed(cfg.seed, "sample", i), source_id=name)
        path = ds_dir / f"{name}.csv"
        save_dataset(ds, path)
        files.append(path)
    _update_manifest(out, cfg, "sample", files, time.perf_counter() - t0)
    return files


def reconstruct(cfg: RunConfig, out: str | Path) -> list[Path]:
    """Maximum-likelihood reconstruction from the datasets alone.

    This stage never opens the simulated density matrices; the closed loop
    stays honest by consuming nothing but the sampled records.
    """
    out = Path(out)
    ds_dir = out / "datasets"
    if not ds_dir.exists() or not any(ds_dir.glob("*.csv")):
        raise MissingInputError("sample", f"no dataset CSVs under {ds_dir}")
    t0 = time.perf_counter()
    files: list[Path] = []
    for path in sorted(ds_dir.glob("*.csv")):
        ds = load_dataset(path)
        name = path.stem
        rho_hat, diag = mle_reconstruct(ds, cfg.mle)
        d = out / "recon" / name
        d.mkdir(parents=True, exist_ok=True)
        save_density_matrix(rho_hat, d / "density_matrix.json")
        _write_json(
            {
                "iterations": diag["iterations"],
                "final_log_likelihood": diag["final_log_likelihood"],
                "converged": diag["converged"],
                "monotone": diag["monotone"],
                "warnings": diag["warnings"],
                "log_likelihood_history": diag["log_likelihood_history"],
            },
            d / "diagnostics.json",
        )
        files.extend([d / "density_matrix.json", d / "diagnostics.json"])
    _update_manifest(out, cfg, "reconstruct", files, time.perf_counter() - t0)
    return files


def analyze(cfg: RunConfig, out: str | Path) -> list[Path]:
    """Compare simulation against reconstruction, with bootstrap error bars."""
    out = Path(out)
    _require(out, "analyze", "simulate", cfg)
    _require(out, "analyze", "reconstruct", cfg)
    t0 = time.perf_counter()
    files: list[Path] = []
    quad_axis = QuadGrid.linspace(cfg.grids.quad_min, cfg.grids.quad_max, cfg.grids.quad_points)
    workers = os.cpu_count() or 1
    summary: dict = {"config_hash": cfg.config_hash(), "mode": cfg.mode, "states": {}}
    for i, name in enumerate(state_names(cfg)):
        sim = load_density_matrix(out / "states" / name / "density_matrix.json")
        rec = load_density_matrix(out / "recon" / name / "density_matrix.json")
        common = max(sim.config.cutoff, rec.config.cutoff)
        ds = load_dataset(out / "datasets" / f"{name}.csv")
        rep = bootstrap(
            ds,
            cfg.mle,
            replicas=cfg.bootstrap_replicas,
            seed=_stage_seed(cfg.seed, "bootstrap", i),
            workers=workers,
        )
        boot_path = out / "recon" / name / "bootstrap.json"
        _write_json(rep.to_dict(), boot_path)
        files.append(boot_path)
        sim_peak = coherence_peak(sim, quad_axis)
        rec_peak = coherence_peak(rec, quad_axis)
        summary["states"][name] = {
            "fidelity": fidelity(sim.embed(common), rec.embed(common)),
            "mean_photon": {
                "simulated": mean_photon(sim),
                "reconstructed": mean_photon(rec),
                "sigma": rep.mean_photon[1],
            },
            "origin_wigner": {
                "simulated": origin_parity(sim),
                "reconstructed": origin_parity(rec),
                "sigma": rep.origin_wigner[1],
            },
            "peak_coherence": {
                "simulated": sim_peak.off_diagonal_value,
                "simulated_diag": sim_peak.diagonal_value,
                "reconstructed": rec_peak.off_diagonal_value,
                "sigma": rep.peak_coherence[1],
            },
        }
    if cfg.mode != CAT_PANELS_MODE:
        table = count_rate_table(cfg.experiment, cfg.experiment.herald_n)
        summary["count_rates"] = [
            {"n": n, "probability": p, "rate_cps": rate} for n, p, rate in table
        ]
        rates_path = out / "analysis" / "count_rates.csv"
        rates_path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["n,probability,rate_cps"]
        for n, p, rate in table:
            lines.append(f"{n},{p!r},{rate!r}")
        rates_path.write_text("\n".join(lines) + "\n", encoding="ascii")
        files.append(rates_path)
    summary_path = out / "analysis" / "summary.json"
    summary_path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(summary, summary_path)
    files.append(summary_path)
    _update_manifest(out, cfg, "analyze", files, time.perf_counter() - t0)
    return files


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"check": name, "passed": bool(passed), "detail": detail}


def _subtraction_checks(cfg: RunConfig, out: Path, summary: dict) -> list[dict]:
    checks = []
    n_max = cfg.experiment.herald_n
    names = [f"herald_{n}" for n in range(n_max + 1)]
    w00 = [summary["states"][n]["origin_wigner"]["simulated"] for n in names]
    signs_ok = all(
        (v > 0) == (n % 2 == 0) and abs(v) > 0.005 for n, v in enumerate(w00)
    )
    checks.append(
        _check(
            "parity_sign_pattern",
            signs_ok,
            "W(0,0) alternates +,-,... with |W(0,0)| > 0.005: "
            + ", ".join(f"{v:+.4f}" for v in w00),
        )
    )

    neg_ok = True
    minima = []
    for n in range(1, n_max + 1):
        rho = load_density_matrix(out / "states" / f"herald_{n}" / "density_matrix.json")
        wx = np.linspace(cfg.grids.wigner_min, cfg.grids.wigner_max, cfg.grids.wigner_points)
        m = float(wigner(rho, wx, wx).values.min())
        minima.append(m)
        neg_ok = neg_ok and (m < -0.002)
    checks.append(
        _check(
            "wigner_negativity",
            neg_ok,
            "min W < -0.002 for every n >= 1: " + ", ".join(f"{m:+.4f}" for m in minima),
        )
    )

    means = [summary["states"][n]["mean_photon"]["simulated"] for n in names]
    checks.append(
        _check(
            "mean_photon_monotone",
            all(means[i] < means[i + 1] for i in range(len(means) - 1)),
            "simulated mean photon strictly increases: "
            + ", ".join(f"{m:.3f}" for m in means),
        )
    )

    rho0 = load_density_matrix(out / "states" / "herald_0" / "density_matrix.json")
    odd = float(rho0.diagonal[1::2].sum())
    checks.append(
        _check("odd_weight_n0", odd > 0.01, f"odd-photon weight of the n=0 state: {odd:.4f}")
    )

    rates = {row["n"]: row["rate_cps"] for row in summary.get("count_rates", [])}
    if 3 in rates and 4 in rates:
        r3, r4 = rates[3], rates[4]
        ratio = r3 / r4 if r4 > 0 else float("inf")
        ok = (
            REFERENCE_RATE_3 / 10 <= r3 <= REFERENCE_RATE_3 * 10
            and REFERENCE_RATE_4 / 10 <= r4 <= REFERENCE_RATE_4 * 10
            and 30.0 <= ratio <= 500.0
        )
        checks.append(
            _check(
                "count_rates",
                ok,
                f"rate(3)={r3:.1f} cps vs {REFERENCE_RATE_3}, rate(4)={r4:.2f} cps vs "
                f"{REFERENCE_RATE_4}, ratio={ratio:.1f} (expected within x10 and ratio in [30, 500])",
            )
        )

    if n_max >= 4:
        c4 = summary["states"]["herald_4"]["peak_coherence"]
        c1 = summary["states"]["herald_1"]["peak_coherence"]["simulated"]
        c3 = summary["states"]["herald_3"]["peak_coherence"]["simulated"]
        ok = (
            c4["simulated"] > 0
            and c4["simulated"] >= 0.25 * c4["simulated_diag"]
            and c1 < 0
            and c3 < 0
        )
        checks.append(
            _check(
                "coherence_signs",
                ok,
                f"n=4 off-diagonal {c4['simulated']:+.4f} vs 25% of diagonal peak "
                f"{0.25 * c4['simulated_diag']:.4f}; n=1 {c1:+.4f} < 0, n=3 {c3:+.4f} < 0",
            )
        )

    fids = {n: summary["states"][n]["fidelity"] for n in summary["states"]}
    checks.append(
        _check(
            "closed_loop_fidelity",
            all(f >= 0.98 for f in fids.values()),
            "reconstruction fidelity >= 0.98 for every state: "
            + ", ".join(f"{k}={v:.4f}" for k, v in fids.items()),
        )
    )

    sign_ok = all(
        np.sign(summary["states"][n]["origin_wigner"]["reconstructed"])
        == np.sign(summary["states"][n]["origin_wigner"]["simulated"])
        for n in names
    )
    checks.append(
        _check(
            "reconstructed_sign_match",
            sign_ok,
            "reconstructed W(0,0) signs match the simulated states",
        )
    )

    sigmas = [summary["states"][n]["origin_wigner"]["sigma"] for n in names]
    checks.append(
        _check(
            "bootstrap_sigma",
            all(s < 0.05 for s in sigmas),
            "bootstrap sigma of W(0,0) < 0.05: " + ", ".join(f"{s:.4f}" for s in sigmas),
        )
    )
    return checks


def _cat_checks(cfg: RunConfig, summary: dict) -> list[dict]:
    checks = []
    w_even = summary["states"]["cat_even"]["origin_wigner"]["simulated"]
    w_odd = summary["states"]["cat_odd"]["origin_wigner"]["simulated"]
    checks.append(
        _check(
            "cat_origin_values",
            abs(w_even - 1 / math.pi) < 1e-6 and abs(w_odd + 1 / math.pi) < 1e-6,
            f"W(0,0) = {w_even:+.6f} (even) and {w_odd:+.6f} (odd) vs +-1/pi",
        )
    )
    ideal = summary["states"]["cat_even"]["peak_coherence"]["simulated"]
    lossy = summary["states"]["cat_even_lossy"]["peak_coherence"]["simulated"]
    checks.append(
        _check(
            "loss_degrades_coherence",
            abs(lossy) < abs(ideal),
            f"peak off-diagonal {lossy:+.4f} (lossy) vs {ideal:+.4f} (ideal)",
        )
    )
    mixed = summary["states"]["cat_mixed"]["peak_coherence"]
    checks.append(
        _check(
            "mixture_has_no_coherence",
            abs(mixed["simulated"]) < 0.02 * mixed["simulated_diag"],
            f"mixture off-diagonal {mixed['simulated']:+.2e} vs 2% of diagonal peak",
        )
    )
    return checks


def report(cfg: RunConfig, out: str | Path) -> tuple[dict, bool]:
    """Summarize the run: integrity of all recorded files plus physics checks.

    Returns the report payload and whether every check passed.
    """
    out = Path(out)
    manifest = _require(out, "report", "analyze", cfg)
    t0 = time.perf_counter()
    summary = json.loads((out / "analysis" / "summary.json").read_text(encoding="ascii"))

    integrity_failures = []
    for stage, entry in manifest["stages"].items():
        for rel, digest in entry["files"].items():
            p = out / rel
            if not p.exists():
                integrity_failures.append(f"{rel} missing")
            elif _sha256(p) != digest:
                integrity_failures.append(f"{rel} checksum mismatch")
    checks = [
        _check(
            "manifest_integrity",
            not integrity_failures,
            "all recorded files present with matching checksums"
            if not integrity_failures
            else "; ".join(integrity_failures[:5]),
        )
    ]
    if cfg.mode == CAT_PANELS_MODE:
        checks.extend(_cat_checks(cfg, summary))
    else:
        checks.extend(_subtraction_checks(cfg, out, summary))

    recon_warnings = {}
    for diag_path in sorted((out / "recon").glob("*/diagnostics.json")):
        diag = json.loads(diag_path.read_text(encoding="ascii"))
        if diag.get("warnings"):
            recon_warnings[diag_path.parent.name] = diag["warnings"]

    all_pass = all(c["passed"] for c in checks)
    payload = {
        "config_hash": cfg.config_hash(),
        "mode": cfg.mode,
        "checks": checks,
        "reconstruction_warnings": recon_warnings,
        "all_passed": all_pass,
    }
    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    _write_json(payload, report_dir / "report.json")

    width = max(len(c["check"]) for c in checks)
    lines = ["check".ljust(width) + "  result  detail", "-" * (width + 60)]
    for c in checks:
        lines.append(
            c["check"].ljust(width)
            + ("  PASS    " if c["passed"] else "  FAIL    ")
            + c["detail"]
        )
    lines.append("-" * (width + 60))
    for state, msgs in recon_warnings.items():
        for msg in msgs:
            lines.append(f"warning [{state}]: {msg}")
    lines.append(f"overall: {'PASS' if all_pass else 'FAIL'}")
    (report_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="ascii")

    _update_manifest(
        out, cfg, "report", [report_dir / "report.json", report_dir / "report.txt"],
        time.perf_counter() - t0,
    )
    return payload, all_pass
