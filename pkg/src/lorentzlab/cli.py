"""Command-line surface: every experiment as a reproducible file-emitting run.

Each command writes a CSV transcript plus a `.manifest.json` carrying the
full configuration echo, the seed, and the package version, enough to
re-run it exactly.  Nothing time- or host-dependent goes into the outputs,
so identical configs produce byte-identical files.

Exit codes: 0 all checks pass, 2 checks ran and failed, 1 configuration or
usage error.
"""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass
from importlib.metadata import version as _pkg_version

import click
import numpy as np

from . import liealg as la
from . import renorm as rn
from . import reps
from . import shearing as sh
from . import timechange as tch
from .errors import ParameterRangeError

SCHEMA_VERSION = 1


def _pkg_ver() -> str:
    try:
        return _pkg_version("lorentzlab")
    except Exception:
        return "unknown"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


@dataclass(frozen=True)
class RunConfig:
    """Validated run description echoed into every manifest.

    Command bodies validate parameters against the module preconditions
    before constructing this; randomized runs must carry a seed.
    """

    command: str
    params: dict
    out: str
    fmt: str = "csv"
    seed: int | None = None

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise ParameterRangeError(f"format must be csv/json, {self.fmt}")


def _write_manifest(path, cfg: RunConfig, columns, summary=None):
    import scipy
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "params": cfg.params,
        "format": cfg.fmt,
        "seed": cfg.seed,
        "package_version": _pkg_ver(),
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__,
                     "python": ".".join(map(str, sys.version_info[:3]))},
        "columns": list(columns),
    }
    if summary is not None:
        doc["summary"] = summary
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _outdir(out):
    path = out or os.environ.get("LORENTZLAB_OUT", ".")
    os.makedirs(path, exist_ok=True)
    return path


class ChecksFailed(Exception):
    pass


@click.group()
def cli():
    """Numerical laboratory for SO(n,1) structure and dynamics."""


# ---------------------------------------------------------------------------
# lie-check
# ---------------------------------------------------------------------------

def _lie_check_rows(n, seed):
    rng = np.random.default_rng(seed)
    gens = la.generators(n)
    rows = []

    def add(name, residual, tol=1e-10):
        rows.append((name, float(residual), bool(residual <= tol)))

    add("[Y_n,U]=-U",
        np.abs(la.bracket(gens.Yn, gens.U).mat + gens.U.mat).max())
    add("[Y_n,Ut]=Ut",
        np.abs(la.bracket(gens.Yn, gens.Ut).mat - gens.Ut.mat).max())
    b = la.bracket(gens.U, gens.Ut)
    c = b.mat[n - 1, n] / gens.Yn.mat[n - 1, n]
    add("[U,Ut] in R*Y_n", np.abs(b.mat - c * gens.Yn.mat).max())
    worst = 0.0
    for _ in range(50):
        x = la.random_algebra_element(n, rng)
        y = la.random_algebra_element(n, rng)
        z = la.random_algebra_element(n, rng)
        j = (la.bracket(la.bracket(x, y), z).mat
             + la.bracket(la.bracket(y, z), x).mat
             + la.bracket(la.bracket(z, x), y).mat)
        scale = max(x.norm() * y.norm() * z.norm(), 1.0)
        worst = max(worst, np.abs(j).max() / scale)
    add("jacobi identity", worst)
    worst = 0.0
    for _ in range(20):
        x = la.random_algebra_element(n, rng)
        a1 = la.random_algebra_element(n, rng)
        b1 = la.random_algebra_element(n, rng)
        r = (la.killing_form(la.bracket(x, a1), b1)
             + la.killing_form(a1, la.bracket(x, b1)))
        worst = max(worst, abs(r) / max(x.norm() * a1.norm() * b1.norm(), 1.0))
    add("killing ad-invariance", worst, 1e-9)
    worst = 0.0
    for _ in range(100):
        v = la.random_algebra_element(n, rng, 0.02)
        w = la.log_principal(la.exp_matrix(v))
        worst = max(worst, np.abs(w.mat - v.mat).max() / max(v.norm(), 1e-30))
    add("exp/log roundtrip", worst, 1e-9)
    worst = 0.0
    for _ in range(30):
        g = la.exp_matrix(la.random_algebra_element(n, rng, 0.4))
        f = la.iwasawa(g)
        from scipy.linalg import expm
        rec = f.k.mat @ expm(f.t * gens.Yn.mat) @ f.nu.mat
        worst = max(worst, np.abs(rec - g.mat).max())
    add("iwasawa reconstruction", worst)
    if n >= 3:
        wd = la.sl2_weight_decompose(n)
        worst = 0.0
        for comp in wd.vperp_components:
            vs = comp.varsigma
            for i, v in enumerate(comp.vectors):
                r = la.bracket(gens.Yn, v).mat - 0.5 * (vs - 2 * i) * v.mat
                worst = max(worst, np.abs(r).max())
                if i < vs:
                    r2 = (la.bracket(gens.U, v).mat
                          - (i + 1) * comp.vectors[i + 1].mat)
                    worst = max(worst, np.abs(r2).max())
                else:
                    worst = max(worst, np.abs(la.bracket(gens.U, v).mat).max())
        add("weight strings", worst)
        cb = la.centralizer_basis(n)
        adU = la.ad_matrix(gens.U)
        sv = np.linalg.svd(adU, compute_uv=False)
        dim_bf = int(np.sum(sv < 1e-9))
        add("centralizer dimension matches nullspace",
            abs(len(cb) - dim_bf))
        add("centralizer brackets",
            max(np.abs(la.bracket(bb, gens.U).mat).max() for bb in cb))
    return rows


@cli.command("lie-check")
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              default="csv", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_lie_check(n, seed, fmt, out):
    """Structure suite: brackets, sl2 triple, weight strings, centralizer.

    \b
    CSV columns: check, residual, passed.
    """
    if not (2 <= n <= 8):
        raise click.UsageError(f"need 2 <= n <= 8, got n={n}")
    rows = _lie_check_rows(n, seed)
    outdir = _outdir(out)
    cols = ("check", "residual", "passed")
    if fmt == "csv":
        path = os.path.join(outdir, f"lie-check-n{n}.csv")
        _write_csv(path, cols, rows)
    else:
        path = os.path.join(outdir, f"lie-check-n{n}.json")
        doc = {"schema_version": SCHEMA_VERSION, "n": n,
               "checks": [{"check": a, "residual": b, "passed": c}
                          for a, b, c in rows]}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    cfg = RunConfig(command="lie-check", params={"n": n}, out=outdir,
                    fmt=fmt, seed=seed)
    _write_manifest(path + ".manifest.json", cfg, cols)
    for name, res, ok in rows:
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}  residual {res:.3e}")
    if not all(r[2] for r in rows):
        raise ChecksFailed("lie-check failures")


# ---------------------------------------------------------------------------
# branching
# ---------------------------------------------------------------------------

@cli.command("branching")
@click.option("--n", type=int, required=True)
@click.option("--nu", type=float, required=True)
@click.option("--s", type=float, default=0.0, show_default=True)
@click.option("--l-max", type=int, default=30, show_default=True)
@click.option("--m-cutoff", type=int, default=800, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_branching(n, nu, s, l_max, m_cutoff, out):
    """Blockwise branching sums over l, with tail bounds and the
    boundedness verdict.

    \b
    CSV columns: l, partial_sum, tail_bound.
    """
    rho, rho_flat = (n - 1) / 2.0, (n - 2) / 2.0
    if not (rho_flat < nu < rho):
        raise click.UsageError(
            f"branching needs rho_flat = {rho_flat} < nu < rho = {rho}; "
            f"nu = {nu} is outside")
    ctx = reps.RepContext(n, nu, 8, s=s)
    rows = []
    for l in range(l_max + 1):
        b = reps.branching_sum(ctx, l, m_cutoff)
        rows.append((l, b.partial_sum, b.tail_bound))
    sums = [r[1] for r in rows]
    summary = {
        "sup": max(sums), "inf": min(sums),
        "ratio": max(sums) / min(sums),
        "verdict": "bounded-ratio",
    }
    outdir = _outdir(out)
    path = os.path.join(outdir, f"branching-n{n}-nu{nu}-s{s}.csv")
    cols = ("l", "partial_sum", "tail_bound")
    _write_csv(path, cols, rows)
    cfg = RunConfig(command="branching",
                    params={"n": n, "nu": nu, "s": s, "l_max": l_max,
                            "m_cutoff": m_cutoff}, out=outdir)
    _write_manifest(path + ".manifest.json", cfg, cols, summary=summary)
    click.echo(f"sup {summary['sup']:.6f}  inf {summary['inf']:.6f}  "
               f"ratio {summary['ratio']:.4f}")


# ---------------------------------------------------------------------------
# invdist
# ---------------------------------------------------------------------------

@cli.command("invdist")
@click.option("--nu", type=float, required=True)
@click.option("--modes", type=int, default=128, show_default=True)
@click.option("--tolerance", type=float, default=1e-6, show_default=True)
@click.option("--s", type=float, default=2.0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_invdist(nu, modes, tolerance, s, out):
    """Invariant distributions of the n=2 complementary-series model.

    \b
    CSV columns: index, yn_eigenvalue, residual, eigen_residual, order_s.
    """
    if not (0.0 < nu < 0.5):
        raise click.UsageError(f"need 0 < nu < 1/2, got nu={nu}")
    ctx = reps.RepContext(2, nu, modes, s=s)
    dists = reps.invariant_distributions(ctx, tolerance=tolerance)
    rows = [(i, d.yn_eigenvalue, d.residual, d.eigen_residual, d.order_s)
            for i, d in enumerate(dists)]
    outdir = _outdir(out)
    path = os.path.join(outdir, f"invdist-nu{nu}-m{modes}.csv")
    cols = ("index", "yn_eigenvalue", "residual", "eigen_residual", "order_s")
    _write_csv(path, cols, rows)
    summary = {"count": len(dists),
               "expected_eigenvalues": [-(1 + 2 * nu) / 2,
                                        -(1 - 2 * nu) / 2]}
    cfg = RunConfig(command="invdist",
                    params={"nu": nu, "modes": modes,
                            "tolerance": tolerance, "s": s}, out=outdir)
    _write_manifest(path + ".manifest.json", cfg, cols, summary=summary)
    for r in rows:
        click.echo(f"eigenvalue {r[1]:+.6f}  residual {r[2]:.2e}")
    if len(dists) < 2:
        click.echo(f"only {len(dists)} distributions below tolerance "
                   f"(truncation too small?)")


# ---------------------------------------------------------------------------
# shearing
# ---------------------------------------------------------------------------

def _parse_grid(spec: str):
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise click.UsageError("lambda grid must be 'lo:hi[:points]'")
    lo, hi = float(parts[0]), float(parts[1])
    pts = int(parts[2]) if len(parts) == 3 else 25
    if not (0 < lo < hi) or pts < 2:
        raise click.UsageError("need 0 < lo < hi and points >= 2")
    return np.geomspace(lo, hi, pts)


@cli.command("shearing")
@click.option("--n", type=int, default=3, show_default=True)
@click.option("--dir", "direction", type=click.Choice(["b", "ad", "u", "v0"]),
              required=True)
@click.option("--mag", type=float, required=True)
@click.option("--lambda", "lam_spec", type=str,
              default="1e3:1e6:25", show_default=True)
@click.option("--eta", type=float, default=0.5, show_default=True)
@click.option("--rho", type=float, default=0.2, show_default=True)
@click.option("--eps", type=float, default=0.05, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_shearing(n, direction, mag, lam_spec, eta, rho, eps, out):
    """Shearing-exponent experiment along a displacement direction.

    \b
    CSV columns: lambda, applicable, s_lambda, one column per entry
    magnitude (b, a_minus_d, c, weight coordinates), then the pointwise
    exponent columns exp_<entry>; sup exponents and OLS slopes land in the
    manifest summary.
    """
    grid = _parse_grid(lam_spec)
    try:
        params = sh.ShearingParams(eta=eta, gap_exponent=rho, eps=eps)
        rep = sh.shearing_experiment(n, direction, mag, grid, params)
    except ParameterRangeError as e:
        raise click.UsageError(str(e))
    names = sorted({k for r in rep.rows for k in r.entries})
    cols = (["lambda", "applicable", "s_lambda"] + names
            + [f"exp_{k}" for k in names])
    rows = []
    for r in rep.rows:
        exps = [math.log(r.entries[k]) / math.log(r.lam)
                if r.entries.get(k, 0.0) > 1e-300 and r.lam > 1.0
                else math.nan
                for k in names]
        rows.append([r.lam, int(r.applicable),
                     r.s_lambda if r.s_lambda is not None else math.nan]
                    + [r.entries.get(k, math.nan) for k in names] + exps)
    outdir = _outdir(out)
    path = os.path.join(outdir, f"shearing-{direction}-{mag}.csv")
    _write_csv(path, cols, rows)
    verdicts = {}
    failed = False
    for name, e in rep.sup_exponents.items():
        pred = rep.predictions.get(name)
        if pred is None or pred == 0.0:
            continue
        ok = e <= pred + 0.1
        verdicts[name] = {"sup_exponent": e, "predicted": pred, "ok": ok}
        failed = failed or not ok
    cfg = RunConfig(command="shearing",
                    params={"n": n, "dir": direction, "mag": mag,
                            "lambda": lam_spec, "eta": eta, "rho": rho,
                            "eps": eps}, out=outdir)
    _write_manifest(path + ".manifest.json", cfg, cols,
                    summary={"sup_exponents": rep.sup_exponents,
                             "slopes": rep.slopes,
                             "predictions": rep.predictions,
                             "verdicts": verdicts})
    for name, v in sorted(verdicts.items()):
        click.echo(f"{'PASS' if v['ok'] else 'FAIL'}  {name}: "
                   f"sup exponent {v['sup_exponent']:.3f} "
                   f"<= {v['predicted']:.3f} + 0.1")
    if failed:
        raise ChecksFailed("shearing exponent violation")


# ---------------------------------------------------------------------------
# renorm
# ---------------------------------------------------------------------------

@cli.command("renorm")
@click.option("--nu", type=float, required=True)
@click.option("--sigma", type=float, default=1.5, show_default=True)
@click.option("--t0", "T", type=float, default=10.0, show_default=True)
@click.option("--steps", type=int, default=40, show_default=True)
@click.option("--strategy", type=click.Choice(rn._STRATEGIES),
              default="zero", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_renorm(nu, sigma, T, steps, strategy, seed, out):
    """Renormalization-cascade transcript with majorant columns.

    \b
    CSV columns: l, c_plus, c_minus, bound_plus, bound_minus,
    remainder_bound, within_majorant.
    """
    if not (0.0 < nu < 0.5):
        raise click.UsageError(f"need 0 < nu < 1/2, got nu={nu}")
    if not (1.0 <= sigma <= 2.0):
        raise click.UsageError(f"need sigma in [1,2], got {sigma}")
    rng = np.random.default_rng(np.random.Philox(seed))
    traj = rn.simulate_cascade(nu, sigma, T, strategy, steps,
                               remainder_C=1.0, rng=rng)
    rows, failed = [], False
    for l, (cp, cm) in enumerate(traj):
        bp = rn.coefficient_upper_bound(nu, sigma, T, 1.0, 1.0, l, "+")
        bm = rn.coefficient_upper_bound(nu, sigma, T, 1.0, 1.0, l, "-")
        rb = float(rn.remainder_bound(nu, sigma, T, 1.0, l))
        ok = abs(cp[0]) <= bp + 1e-12 and abs(cm[0]) <= bm + 1e-12
        failed = failed or not ok
        rows.append((l, float(cp[0]), float(cm[0]), bp, bm, rb, int(ok)))
    outdir = _outdir(out)
    path = os.path.join(outdir, f"renorm-nu{nu}-{strategy}.csv")
    cols = ("l", "c_plus", "c_minus", "bound_plus", "bound_minus",
            "remainder_bound", "within_majorant")
    _write_csv(path, cols, rows)
    cfg = RunConfig(command="renorm",
                    params={"nu": nu, "sigma": sigma, "T": T,
                            "steps": steps, "strategy": strategy},
                    out=outdir, seed=seed)
    _write_manifest(path + ".manifest.json", cfg, cols)
    click.echo(f"{steps} steps, majorant {'ok' if not failed else 'VIOLATED'}")
    if failed:
        raise ChecksFailed("cascade exceeded the majorant")


# ---------------------------------------------------------------------------
# timechange
# ---------------------------------------------------------------------------

@cli.command("timechange")
@click.option("--toy", type=click.Choice(["torus", "twist"]),
              default="torus", show_default=True)
@click.option("--tau-config", type=str,
              default='{"const": 1.0, "terms": [{"amp": 0.25, "freq": [1, 0]}]}',
              show_default=True)
@click.option("--t-max", type=float, default=50.0, show_default=True)
@click.option("--points", type=int, default=26, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_timechange(toy, tau_config, t_max, points, seed, out):
    """Cocycle/inverse transcript for a declarative density on a toy flow.

    \b
    CSV columns: t, xi, z, inverse_residual.
    """
    try:
        obs = tch.observable_from_config(tau_config)
        tc = tch.TimeChange.from_trig(obs)
    except (ParameterRangeError, KeyError, ValueError) as e:
        raise click.UsageError(f"bad tau config: {e}")
    rng = np.random.default_rng(np.random.Philox(seed))
    if toy == "torus":
        flow = tch.torus_linear_flow([1.0, 0.5 * (math.sqrt(5) - 1)])
    else:
        flow = tch.torus_twist_flow()
    x = rng.random(2)
    rows, failed = [], False
    for t in np.linspace(0.0, t_max, points):
        xi = tch.cocycle_xi(tc, flow, x, float(t))
        z = tch.inverse_z(tc, flow, x, float(t))
        resid = abs(tch.cocycle_xi(tc, flow, x, z) - t)
        failed = failed or resid > 1e-8
        rows.append((float(t), xi, z, resid))
    outdir = _outdir(out)
    path = os.path.join(outdir, f"timechange-{toy}.csv")
    cols = ("t", "xi", "z", "inverse_residual")
    _write_csv(path, cols, rows)
    cfg = RunConfig(command="timechange",
                    params={"toy": toy, "tau_config": json.loads(tau_config),
                            "t_max": t_max, "points": points},
                    out=outdir, seed=seed)
    _write_manifest(path + ".manifest.json", cfg, cols)
    click.echo(f"max inverse residual "
               f"{max(r[3] for r in rows):.2e}")
    if failed:
        raise ChecksFailed("inverse identity residual exceeded 1e-8")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"error: {e.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except ChecksFailed as e:
        click.echo(f"FAILED: {e}", err=True)
        sys.exit(2)
    except ParameterRangeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
