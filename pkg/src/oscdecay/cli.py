"""Command-line front end.

Exit codes: 0 success, 1 I/O failure, 2 validation or hypothesis violation,
3 insufficient data for a fit.
"""

from __future__ import annotations

import functools
import hashlib
import io
import json
import math
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from . import decayfit, newton, polycore, rates
from .numop import DEFAULT_SEED, CutoffSpec

EXIT_IO, EXIT_VALIDATION, EXIT_DATA = 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, decayfit.InsufficientDataError):
        return EXIT_DATA
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_VALIDATION


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CliError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.code)
        except (OSError, ValueError, ZeroDivisionError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))

    return wrapper


# --- serialization ------------------------------------------------------------


def jsonable(value):
    """Fractions become ``"p/q"`` strings; floats keep shortest round-trip form."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2) + "\n"


def emit(text: str, output: str | None, out_dir: Path) -> None:
    if output is None:
        click.echo(text, nl=False)
        return
    path = out_dir / output
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


# --- phase files ----------------------------------------------------------------


def read_phase_file(path) -> polycore.HomogeneousPolynomial:
    """First line ``n=<int>``, the remaining lines one expression."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise CliError(f"{path}: empty phase file", EXIT_VALIDATION)
    head = lines[0].replace(" ", "")
    if not head.startswith("n=") or not head[2:].isdigit():
        raise CliError(f"{path}: first line must be 'n=<int>'", EXIT_VALIDATION)
    n = int(head[2:])
    if n < 1:
        raise CliError(f"{path}: n must be positive", EXIT_VALIDATION)
    return polycore.parse_polynomial(" ".join(lines[1:]), n)


def phase_key(S: polycore.HomogeneousPolynomial) -> str:
    return hashlib.sha256(f"n={S.n};{polycore.format_polynomial(S)}".encode()).hexdigest()


EXAMPLE_COUPLED = ("1/5*(x1^5*y1 + x1*y1^5 + x1*x2^4*y2 + x1*y1^4*y2 + x1^4*x2*y1"
                   " + x2*y1*y2^4 + x2^5*y2 + x2*y2^5)")
EXAMPLE_SEPARABLE = "1/5*(x1^5*y1 + x1*y1^5 + x2^5*y2 + x2*y2^5)"


def _expand(text: str) -> str:
    inner = text[text.index("(") + 1:text.rindex(")")]
    return " + ".join("1/5*" + t.strip() for t in inner.split("+"))


KNOWN_RESULTS = {
    phase_key(polycore.parse_polynomial(_expand(EXAMPLE_SEPARABLE), 2)): {
        "id": "separable-sextic",
        "known_sharp_range": ["6/5", "6"],
        "annotation": (
            "Known result: the operator separates into one-dimensional factors and "
            "||T_lambda||_p <= C lambda^(-1/3) for 6/5 <= p <= 6. This known sharp range "
            "strictly contains the range [3/2, 3] predicted from d/(d-n) and d/n, so "
            "d/(d-n) <= p <= d/n \"is not necessary to guarantee the sharp decay\"."
        ),
    },
    phase_key(polycore.parse_polynomial(_expand(EXAMPLE_COUPLED), 2)): {
        "id": "coupled-sextic",
        "annotation": (
            "The mixed Hessian has off-diagonal entries (x2^4 + y1^4)/5 and (x1^4 + y2^4)/5 "
            "and diagonal entries with extra cubic cross terms. Its HS norm to the power "
            "1/(d-2) fails the triangle inequality at sampled pairs, so the norm "
            "hypothesis is not met even though the rank-one condition holds."
        ),
    },
}


def analyze_phase(S: polycore.HomogeneousPolynomial, samples_per_dim: int = 64,
                  triple_samples: int = 20000, seed: int = DEFAULT_SEED) -> dict:
    od = polycore.validate_O_d(S)
    if not od:
        bad = ", ".join(polycore.format_polynomial(polycore.from_terms(S.n, [(a, b, 1)]))
                        for a, b in od.offending)
        raise CliError(f"phase is not in O^d: pure x- or y-monomials {bad}", EXIT_VALIDATION)
    nd = newton.analyze_newton(S)
    rank = newton.rank_one_check(S, samples_per_dim)
    norm = newton.norm_hypothesis_check(S, triple_samples, samples_per_dim, seed=seed)
    in_range = S.d > 2 * S.n >= 4
    report = {
        "phase": polycore.format_polynomial(S),
        "n": S.n,
        "d": S.d,
        "in_O_d": True,
        "support": [list(p) for p in nd.support],
        "t_star": nd.t_star,
        "newton_distance": nd.newton_distance,
        "newton_distance_predicted": Fraction(2 * S.n, S.d),
        "rank_one": {"verdict": rank.verdict, "min_hs": rank.min_hs, "samples": rank.samples},
        "norm_hypothesis": {
            "verdict": norm.verdict,
            "reason": norm.reason,
            "pairs_tested": norm.pairs_tested,
            "worst_ratio": norm.worst_ratio,
            "witness": [list(w) if isinstance(w, tuple) else w for w in norm.witness],
            "notes": list(norm.notes),
        },
        "theorem_A_applicable": bool(in_range and rank.passed and norm.passed),
        "sharp_range": list(rates.sharp_range(S.d, S.n)) if S.d > S.n else None,
        "annotations": [],
    }
    known = KNOWN_RESULTS.get(phase_key(S))
    if known is not None:
        report["annotations"].append(dict(known))
    return report


def _prediction_dict(pred) -> dict:
    if isinstance(pred, rates.DecayPrediction):
        return {
            "d": pred.d, "n": pred.n, "p": pred.p, "exponent": pred.exponent,
            "log_exponent": pred.log_exponent, "sharpness": pred.sharpness,
            "regime": pred.regime, "exact": pred.exact, "in_hypothesis": pred.in_hypothesis,
        }
    s1, s2 = rates.sigma_bounds(pred.d, pred.n)
    return {
        "d": pred.d, "n": pred.n, "sigma": pred.sigma, "t": pred.t, "exponent": pred.exponent,
        "log_exponent": pred.log_exponent, "has_log": pred.has_log, "regime": pred.regime,
        "sigma_1": s1, "sigma_2": s2, "c_z_note": pred.c_z_note, "exact": pred.exact,
    }


def make_prediction(d: int, n: int, p: str | None, sigma: str | None, t: float = 0.0,
                    allow: bool = False):
    if (p is None) == (sigma is None):
        raise CliError("give exactly one of --p and --sigma", EXIT_VALIDATION)
    if p is not None:
        return rates.predict_lp_decay(d, n, p, allow_out_of_hypothesis=allow)
    if not d > 2 * n >= 4 and not allow:
        raise rates.HypothesisError(f"need d > 2n >= 4, got d={d}, n={n}")
    return rates.l2_damped_exponent(sigma, d, n, t)


# --- commands -------------------------------------------------------------------


@click.group()
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True, help="Random seed.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True,
              help="Directory for files named by --output and by report.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel sweep workers.")
@click.pass_context
def cli(ctx, seed, out_dir, jobs):
    """Decay analysis for oscillatory integral operators with homogeneous polynomial phase."""
    ctx.obj = {"seed": seed, "out_dir": Path(out_dir), "jobs": max(1, jobs)}


@cli.command()
@click.argument("phase", type=click.Path(dir_okay=False))
@click.option("--samples-per-dim", type=int, default=64, show_default=True)
@click.option("-o", "--output", default=None, help="Write JSON here (under --out-dir).")
@click.pass_obj
@handle_errors
def analyze(obj, phase, samples_per_dim, output):
    """Newton distance, rank-one and norm-hypothesis checks for a phase file."""
    S = read_phase_file(phase)
    emit(dumps(analyze_phase(S, samples_per_dim, seed=obj["seed"])), output, obj["out_dir"])


@cli.command()
@click.option("--d", "d", type=int, required=True)
@click.option("--n", "n", type=int, required=True)
@click.option("--p", "p", default=None, help="Lebesgue exponent, e.g. 2 or 6/5.")
@click.option("--sigma", default=None, help="Real part of the damping exponent.")
@click.option("--t", "t", type=float, default=0.0, help="Imaginary part of the damping exponent.")
@click.option("--allow-out-of-hypothesis", is_flag=True)
@click.option("-o", "--output", default=None)
@click.pass_obj
@handle_errors
def predict(obj, d, n, p, sigma, t, allow_out_of_hypothesis, output):
    """Predicted decay exponent for L^p (--p) or the damped L^2 family (--sigma)."""
    pred = make_prediction(d, n, p, sigma, t, allow_out_of_hypothesis)
    emit(dumps(_prediction_dict(pred)), output, obj["out_dir"])


def _ladder(ladder: str | None, lmin: float, lmax: float, step: float) -> list[float]:
    if ladder:
        return [float(Fraction(v.strip())) for v in ladder.split(",") if v.strip()]
    return decayfit.octave_ladder(lmin, lmax, step)


def _run_sweep(obj, S, p, sigma, ladder, radius, max_nodes, min_n, cutoff, plateau):
    policy = decayfit.GridPolicy(radius=radius, min_N=min_n, max_nodes=max_nodes)
    cut = CutoffSpec(cutoff, plateau=plateau if cutoff != "smooth_bump" else 0.0)
    z = (float(Fraction(sigma)) if sigma is not None else 0.0, 0.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        samples = decayfit.sweep(S, ladder, p=float(Fraction(p)), z=z, cutoff=cut, policy=policy,
                                 seed=obj["seed"], jobs=obj["jobs"])
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)
    return samples


def _csv_text(samples) -> str:
    buf = io.StringIO()
    decayfit.write_csv_stream(buf, samples)
    return buf.getvalue()


sweep_options = [
    click.option("--p", "p", default="2", show_default=True, help="Lebesgue exponent."),
    click.option("--sigma", default=None, help="Damping exponent (real); L^2 only."),
    click.option("--ladder", default=None, help="Comma-separated lambda values."),
    click.option("--lambda-min", "lmin", type=float, default=4, show_default=True,
                 help="log2 of the smallest lambda."),
    click.option("--lambda-max", "lmax", type=float, default=10, show_default=True,
                 help="log2 of the largest lambda."),
    click.option("--lambda-step", "lstep", type=float, default=1.0, show_default=True,
                 help="Ladder step in log2 units."),
    click.option("--radius", type=float, default=1.0, show_default=True),
    click.option("--max-nodes", type=int, default=200_000, show_default=True,
                 help="Node budget per side."),
    click.option("--min-n", type=int, default=16, show_default=True),
    click.option("--cutoff", type=click.Choice(["flat_top", "smooth_bump", "cosine_taper"]),
                 default="flat_top", show_default=True),
    click.option("--plateau", type=float, default=0.7, show_default=True),
]


def with_sweep_options(func):
    for opt in reversed(sweep_options):
        func = opt(func)
    return func


@cli.command()
@click.argument("phase", type=click.Path(dir_okay=False))
@with_sweep_options
@click.option("-o", "--output", default=None, help="Write CSV here (under --out-dir).")
@click.pass_obj
@handle_errors
def estimate(obj, phase, p, sigma, ladder, lmin, lmax, lstep, radius, max_nodes, min_n, cutoff,
             plateau, output):
    """Norm estimates over a lambda ladder, as CSV."""
    S = read_phase_file(phase)
    if sigma is not None and Fraction(p) != 2:
        raise CliError("--sigma requires --p 2", EXIT_VALIDATION)
    samples = _run_sweep(obj, S, p, sigma, _ladder(ladder, lmin, lmax, lstep), radius, max_nodes,
                         min_n, cutoff, plateau)
    emit(_csv_text(samples), output, obj["out_dir"])


def fit_report(samples, pred, tol: float) -> dict:
    fit = decayfit.fit_power_law(samples, pred)
    cmp = decayfit.compare(fit, pred, tol)
    return {
        "n_samples": len(fit.samples),
        "lambdas": [s.lam for s in fit.samples],
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "log_model_slope": fit.log_model_slope,
        "log_exponent": pred.log_exponent,
        "predicted_exponent": pred.exponent,
        "regime": cmp.regime,
        "used_log_model": cmp.used_log_model,
        "deviation": cmp.deviation,
        "tolerance": cmp.tolerance,
        "verdict": "pass" if cmp.passed else "fail",
    }, fit


def write_plot(path: Path, fit: decayfit.DecayFitResult, pred) -> None:
    """Log-log scatter with the fitted line and a reference line of the predicted slope."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "oscdecay"
    lam = np.array([s.lam for s in fit.samples])
    nrm = np.array([s.norm for s in fit.samples])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(lam, nrm, "o", label="estimates")
    ax.loglog(lam, np.exp(fit.intercept) * lam**fit.slope, "-",
              label=f"fit slope {fit.slope:.4f}")
    e = float(pred.exponent)
    anchor = np.exp(np.mean(np.log(nrm) + e * np.log(lam)))
    ax.loglog(lam, anchor * lam**-e, "--", label=f"predicted slope {-e:.4f}")
    ax.set_xlabel("lambda")
    ax.set_ylabel("operator norm")
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


@cli.command()
@click.argument("csv_path", type=click.Path(dir_okay=False))
@click.option("--d", "d", type=int, required=True)
@click.option("--n", "n", type=int, required=True)
@click.option("--p", "p", default=None)
@click.option("--sigma", default=None)
@click.option("--tol", type=float, default=None, help="Default 0.05 for n=1, 0.10 otherwise.")
@click.option("--allow-out-of-hypothesis", is_flag=True)
@click.option("--plot", default=None, help="SVG path (under --out-dir).")
@click.option("-o", "--output", default=None)
@click.pass_obj
@handle_errors
def fit(obj, csv_path, d, n, p, sigma, tol, allow_out_of_hypothesis, plot, output):
    """Fit a power law to sweep samples and compare with the prediction."""
    samples = decayfit.read_csv(csv_path)
    pred = make_prediction(d, n, p, sigma, 0.0, allow_out_of_hypothesis)
    tol = decayfit.default_tolerance(n) if tol is None else tol
    report, result = fit_report(samples, pred, tol)
    if plot:
        write_plot(obj["out_dir"] / plot, result, pred)
    emit(dumps(report), output, obj["out_dir"])


@cli.command()
@click.argument("phase", type=click.Path(dir_okay=False))
@with_sweep_options
@click.option("--tol", type=float, default=None)
@click.pass_obj
@handle_errors
def report(obj, phase, p, sigma, ladder, lmin, lmax, lstep, radius, max_nodes, min_n, cutoff,
           plateau, tol):
    """Analyze, predict, estimate and fit; writes files and a markdown summary to --out-dir."""
    out: Path = obj["out_dir"]
    out.mkdir(parents=True, exist_ok=True)
    S = read_phase_file(phase)
    analysis = analyze_phase(S, seed=obj["seed"])
    (out / "analysis.json").write_text(dumps(analysis), encoding="utf-8")
    pred = make_prediction(S.d, S.n, None if sigma is not None else p, sigma, 0.0, True)
    (out / "prediction.json").write_text(dumps(_prediction_dict(pred)), encoding="utf-8")
    samples = _run_sweep(obj, S, p, sigma, _ladder(ladder, lmin, lmax, lstep), radius, max_nodes,
                         min_n, cutoff, plateau)
    (out / "samples.csv").write_text(_csv_text(samples), encoding="utf-8")
    tol = decayfit.default_tolerance(S.n) if tol is None else tol
    lines = [
        "# Decay report",
        "",
        f"Phase (n={S.n}, d={S.d}): `{analysis['phase']}`",
        "",
        f"- Newton distance: {analysis['newton_distance']} (2n/d = {Fraction(2 * S.n, S.d)})",
        f"- Rank-one check: {analysis['rank_one']['verdict']} "
        f"(min HS on sphere {analysis['rank_one']['min_hs']:.6g})",
        f"- Norm hypothesis: {analysis['norm_hypothesis']['verdict']}",
        f"- Decay theorem applicable: {analysis['theorem_A_applicable']}",
        f"- Predicted exponent: {pred.exponent} (log power {pred.log_exponent}, {pred.regime})",
    ]
    for note in analysis["annotations"]:
        lines.append(f"- Note: {note['annotation']}")
    code = 0
    try:
        summary, result = fit_report(samples, pred, tol)
    except decayfit.InsufficientDataError as exc:
        lines += ["", f"Fit not possible: {exc}"]
        code = EXIT_DATA
    else:
        (out / "fit.json").write_text(dumps(summary), encoding="utf-8")
        write_plot(out / "fit.svg", result, pred)
        slope = summary["log_model_slope"] if summary["used_log_model"] else summary["slope"]
        lines += [
            "",
            "| lambda | norm | grid N | resolved |",
            "|---|---|---|---|",
            *(f"| {s.lam:g} | {s.norm:.6g} | {s.grid_N} | {s.resolved} |" for s in samples),
            "",
            f"Fitted slope {slope:.4f} against predicted {-float(pred.exponent):.4f}: "
            f"deviation {summary['deviation']:.4f}, tolerance {tol}, **{summary['verdict']}**.",
            "",
            "![fit](fit.svg)",
        ]
    (out / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(str(out / "report.md"))
    if code:
        sys.exit(code)


def main(argv=None):
    cli.main(args=argv, prog_name="oscdecay")


if __name__ == "__main__":
    main()
