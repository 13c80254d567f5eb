"""Command line entry point: one subcommand per experiment id.

Each subcommand runs a seeded campaign and writes a CSV plus a JSON sidecar.
With --check the experiment's built-in acceptance checks run against the
summary and the process exits nonzero with a diagnostic on any failure.
"""

from __future__ import annotations

import json
import sys

import click

from fastabs.harness import EXPERIMENT_IDS, ExperimentConfig, ResultTable, run_experiment


def _common_options(fn):
    fn = click.option("--trials", type=int, default=None, help="Monte-Carlo trials per cell.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Base seed; trial t uses seed+t.")(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None,
                      help="Output CSV path (a .json sidecar is written next to it).")(fn)
    fn = click.option("--snr", type=float, multiple=True, help="SNR points in dB.")(fn)
    fn = click.option("--ns", type=int, multiple=True, help="Subcarrier counts.")(fn)
    fn = click.option("--codebook", type=str, default=None,
                      help="Measurement codebook preset: preset2, preset3, preset4.")(fn)
    fn = click.option("--layout", type=str, default=None, help="Module layout preset.")(fn)
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="JSON config file mirroring ExperimentConfig.")(fn)
    fn = click.option("--check", is_flag=True, default=False,
                      help="Run the experiment's acceptance checks; nonzero exit on failure.")(fn)
    return fn


def _build_config(experiment, config_path, **overrides) -> ExperimentConfig:
    if config_path:
        cfg = ExperimentConfig.from_file(config_path)
        if cfg.experiment != experiment and experiment != "custom":
            raise click.UsageError(
                f"config file names experiment {cfg.experiment!r}, subcommand is {experiment!r}"
            )
        base = {k: v for k, v in vars(cfg).items()}
    else:
        base = {"experiment": experiment}
    mapping = {
        "trials": "trials",
        "seed": "base_seed",
        "out": "out",
        "codebook": "codebook",
        "layout": "layout",
    }
    for opt, fieldname in mapping.items():
        if overrides.get(opt) is not None:
            base[fieldname] = overrides[opt]
    if overrides.get("snr"):
        base["snr_db"] = tuple(overrides["snr"])
    if overrides.get("ns"):
        base["ns"] = tuple(overrides["ns"])
    if config_path and experiment == "custom":
        return ExperimentConfig(**base)
    base["experiment"] = experiment if experiment != "custom" else base.get("experiment", "custom")
    return ExperimentConfig(**base)


def _check_fig4(summary):
    ortho = summary["mean_error_65_115/orthogonal_60_90_120"]
    spread = summary["mean_error_65_115/spread_50_90_130"]
    rand = summary["mean_error_65_115/random_avg"]
    perturbed = summary["mean_error_65_115/perturbed_58_90_122"]
    yield "orthogonal < spread", ortho < spread, f"{ortho:.4g} vs {spread:.4g}"
    yield "spread < random average", spread < rand, f"{spread:.4g} vs {rand:.4g}"
    yield "perturbed within 10% of orthogonal", abs(perturbed - ortho) <= 0.1 * ortho, \
        f"{perturbed:.4g} vs {ortho:.4g}"


def _check_fig5(table: ResultTable):
    rows = table.rows
    cells = {}
    for r in rows:
        cells[(r["codebook"], r["ns"], r["snr_db"])] = r["sigma2_theta"]
    ok_snr = all(
        cells[(cb, ns, s1)] > cells[(cb, ns, s2)]
        for (cb, ns, s1) in cells
        for (cb2, ns2, s2) in cells
        if cb2 == cb and ns2 == ns and s2 > s1
    )
    yield "variance falls with SNR", ok_snr, "monotonicity over the SNR sweep"
    ok_beams = all(
        cells[("preset4", ns, s)] < cells[("preset3", ns, s)] < cells[("preset2", ns, s)]
        for (cb, ns, s) in cells
        if cb == "preset4"
    )
    yield "more beams, lower bound", ok_beams, "preset4 < preset3 < preset2 per cell"


def _check_fig6a(summary):
    rmse = summary["rmse_deg/nomp"]
    yield "refined dominant-path RMSE < 0.25 deg", rmse < 0.25, f"rmse={rmse:.4g} deg"


def _check_fig6b(summary):
    nomp = summary["rmse2_deg/caseI/nomp"]
    omp = summary["rmse2_deg/caseI/omp"]
    yield "unrefined second-path RMSE > 5x refined", omp > 5.0 * nomp, \
        f"omp={omp:.4g} deg, nomp={nomp:.4g} deg"


def _check_fig6c(summary):
    vals = [summary[f"rmse_deg/caseI/m{m}"] for m in (2, 3, 4)]
    ok = all(v > 0 and v == v for v in vals)
    yield "finite RMSE for all codebooks", ok, f"rmse(m2,m3,m4)={vals}"


def _check_fig7(summary):
    frac = summary.get("frac_loss_gt_3db/m2")
    yield "two-beam loss>3dB fraction in [5%, 12%]", frac is not None and 0.05 <= frac <= 0.12, \
        f"fraction={frac}"
    inside = summary.get("fail_rate_inside_85_95/m2")
    outside = summary.get("fail_rate_outside_85_95/m2")
    if inside is not None and outside is not None:
        ok = inside >= 1.5 * outside
        yield "failures concentrated near broadside", ok, \
            f"fail rate inside (85,95) deg={inside:.3f}, outside={outside:.3f}"


def _check_fig8(summary):
    for m in (3, 4):
        agree = summary[f"agreement/m{m}"]
        med = summary[f"median_loss_db/m{m}"]
        yield f"beam agreement >= 99% (m={m})", agree >= 0.99, f"agreement={agree:.4f}"
        yield f"median loss < 0.5 dB (m={m})", med < 0.5, f"median={med:.4g} dB"


def _check_fig10(summary):
    m_abs, m_es, s, p = 4, 481, 2, 2
    want_fast = {"I": 0, "II": m_abs, "III": s * m_abs, "IV": 0, "V": 0}
    want_es = {"I": 0, "II": m_es, "III": s * m_es, "IV": s * m_es * p, "V": s * m_es * p}
    for stage in ("I", "II", "III", "IV", "V"):
        got_f = summary[f"slots/fast_abs/stage_{stage}"]
        got_e = summary[f"slots/es/stage_{stage}"]
        yield f"stage {stage} slot ledger", \
            got_f == want_fast[stage] and got_e == want_es[stage], \
            f"fast={got_f} (want {want_fast[stage]}), es={got_e} (want {want_es[stage]})"
    modules = [rec["module"] for rec in summary["selection_sequence"]]
    seq = [m for i, m in enumerate(modules) if i == 0 or m != modules[i - 1]]
    yield "module sequence 0-1-0-1", seq == [0, 1, 0, 1], f"sequence={seq}"


def _run_checks(table: ResultTable) -> int:
    checkers = {
        "fig4": lambda t: _check_fig4(t.summary),
        "fig5": _check_fig5,
        "fig6a": lambda t: _check_fig6a(t.summary),
        "fig6b": lambda t: _check_fig6b(t.summary),
        "fig6c": lambda t: _check_fig6c(t.summary),
        "fig7": lambda t: _check_fig7(t.summary),
        "fig8": lambda t: _check_fig8(t.summary),
        "fig10": lambda t: _check_fig10(t.summary),
    }
    checker = checkers.get(table.experiment)
    if checker is None:
        click.echo(f"no built-in checks for {table.experiment}", err=True)
        return 1
    failures = 0
    for name, ok, detail in checker(table):
        status = "PASS" if ok else "FAIL"
        click.echo(f"[{status}] {table.experiment}: {name} ({detail})")
        failures += 0 if ok else 1
    return failures


@click.group()
def main():
    """Fast antenna/beam selection simulator: seeded experiment campaigns."""


def _make_command(experiment_id: str):
    @main.command(name=experiment_id)
    @_common_options
    def _cmd(trials, seed, out, snr, ns, codebook, layout, config_path, check):
        cfg = _build_config(
            experiment_id, config_path,
            trials=trials, seed=seed, out=out, snr=snr, ns=ns,
            codebook=codebook, layout=layout,
        )
        table = run_experiment(cfg)
        if not cfg.out:
            click.echo(json.dumps(table.summary, indent=2, default=str))
        else:
            click.echo(f"wrote {cfg.out} and {cfg.out}.json ({len(table.rows)} rows)")
        if check:
            failures = _run_checks(table)
            if failures:
                click.echo(f"{failures} acceptance check(s) failed", err=True)
                sys.exit(1)

    _cmd.__doc__ = f"Run the {experiment_id} campaign."
    return _cmd


for _eid in EXPERIMENT_IDS:
    if _eid != "custom":
        _make_command(_eid)


@main.command(name="custom")
@_common_options
def custom(trials, seed, out, snr, ns, codebook, layout, config_path, check):
    """Run a campaign fully described by a config file."""
    if not config_path:
        raise click.UsageError("custom requires --config")
    cfg = _build_config("custom", config_path, trials=trials, seed=seed, out=out,
                        snr=snr, ns=ns, codebook=codebook, layout=layout)
    table = run_experiment(cfg)
    if cfg.out:
        click.echo(f"wrote {cfg.out} and {cfg.out}.json ({len(table.rows)} rows)")
    if check:
        failures = _run_checks(table)
        if failures:
            sys.exit(1)


if __name__ == "__main__":
    main()
