from __future__ import annotations

import glob
import json
import logging
import os
import sys

import click
import numpy as np

from . import create_run
from .acceptance import run_suite
from .amoeba_geom import (
    FiberGrid,
    GridSpec,
    PointCloud,
    complement_components,
    convexity_check_region,
    membership_consistency,
    membership_field,
    rasterize,
    sample_amoeba,
    sample_curve_amoeba,
)
from .ap_mean import (
    lattice_polynomial,
    log_modulus_ladder,
    mean_log_modulus,
    pullback_consistency,
    slope_jump_measure,
    zero_amoeba,
    zero_density,
    zeros_in_box,
)
from .capscan import FigureFamily, cap_to_hartogs, hartogs_check, scan_caps, scan_hartogs
from .errors import AmoebaError, NotConvertibleError, PreconditionError, UsageError
from .formats import cloud_csv, field_csv, parse_input, pgm, svg
from .num_kernels import Box
from .poly_core import ExponentialSum, LaurentPolynomial, pullback_exponential
from .ronkin import component_orders, laplacian_mass, ronkin_field, ronkin_value, support_compare
from .utils import dumps

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "pgm", "svg")
VERIFY_FAILED = 2


class AmoebaGroup(click.Group):
    """Maps library errors and click usage errors onto the exit-code contract."""

    def main(self, args=None, prog_name=None, **extra):
        extra.pop("standalone_mode", None)
        try:
            code = super().main(args, prog_name, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(1)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        except AmoebaError as e:
            logger.error("%s: %s", type(e).__name__, e)
            click.echo(f"error: {e}", err=True)
            sys.exit(e.exit_code)
        except OSError as e:
            logger.error("I/O failure: %s", e)
            click.echo(f"error: {e}", err=True)
            sys.exit(UsageError.exit_code)
        sys.exit(code if isinstance(code, int) else 0)


@click.group(cls=AmoebaGroup)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file.")
@click.option("--input", "inputs", multiple=True, help="Input JSON file (repeatable); replaces config inputs.")
@click.option("--out-dir", help="Output directory.")
@click.option("--window", help='Log window "lo1:hi1,lo2:hi2[,lo3:hi3]".')
@click.option("--grid-h", type=float, help="Raster cell size.")
@click.option("--quad-nodes", type=int, help="Starting quadrature nodes per axis.")
@click.option("--ladder", help='Bohr-mean ladder "s1,s2,...".')
@click.option("--seed", type=int)
@click.option("--threads", type=int)
@click.option("--format", "formats", multiple=True, type=click.Choice(FORMATS), help="Extra output formats.")
@click.pass_context
def cli(ctx, config_path, inputs, out_dir, window, grid_h, quad_nodes, ladder, seed, threads, formats):
    """Amoebas, Ronkin functions, Bohr means and pseudoconcavity checks."""
    ctx.obj = {
        "config_path": config_path,
        "overrides": {
            "inputs": tuple(inputs) or None,
            "out_dir": out_dir,
            "window": window,
            "grid_h": grid_h,
            "quad_nodes": quad_nodes,
            "ladder": ladder,
            "seed": seed,
            "threads": threads,
            "formats": tuple(formats) or None,
        },
    }


def _run(ctx, command: str):
    return create_run(ctx.obj["config_path"], command, **ctx.obj["overrides"])


def _inputs(run, kinds=None) -> list:
    if not run.config.inputs:
        raise UsageError("no inputs: pass --input or list 'inputs' in the config")
    items = [parse_input(obj) for obj in run.config.inputs]
    if kinds is not None:
        items = [item for item in items if isinstance(item, kinds)]
        if not items:
            names = ", ".join(k.__name__ for k in (kinds if isinstance(kinds, tuple) else (kinds,)))
            raise UsageError(f"command needs an input of type {names}")
    return items


def _spec(run, n: int) -> GridSpec:
    window = run.config.window
    if len(window) < n:
        raise UsageError(f"window has {len(window)} axes, input needs {n}")
    if len(window) > n:
        logger.info("using the first %d window axes", n)
    return GridSpec(window[:n], run.config.grid_h)


def _field(run, P, spec):
    c = run.config
    return ronkin_field(
        P,
        spec,
        c.quad_spec(P.n),
        err_target=c.err_target,
        cap=c.quad_cap,
        adaptive=c.adaptive,
        fiberwise=c.fiberwise,
        threads=c.threads,
    )


def _region(run, items):
    """Raster of Γ: a point cloud, a hypersurface amoeba, or the amoeba of a curve in (C*)^3."""
    c = run.config
    first = items[0]
    if isinstance(first, PointCloud):
        spec = _spec(run, first.n)
        return first, rasterize(first, spec, c.dilation_r, strict=c.dilation_r is None)
    polys = [p for p in items if isinstance(p, LaurentPolynomial)]
    if not polys:
        raise UsageError("command needs a Laurent polynomial or a point cloud")
    if len(polys) >= 2 and polys[0].n == 3 and polys[1].n == 3:
        spec = _spec(run, 3)
        cloud = sample_curve_amoeba(polys[0], polys[1], FiberGrid.for_grid(spec, c.fiber_args), c.threads)
    else:
        spec = _spec(run, polys[0].n)
        cloud = sample_amoeba(polys[0], FiberGrid.for_grid(spec, c.fiber_args), c.threads)
    return cloud, rasterize(cloud, spec, c.dilation_r)


def _hypersurface(items) -> LaurentPolynomial | None:
    """The polynomial whose amoeba ``_region`` rasterized, or None for clouds and curves."""
    if isinstance(items[0], PointCloud):
        return None
    polys = [p for p in items if isinstance(p, LaurentPolynomial)]
    if len(polys) >= 2 and polys[0].n == 3 and polys[1].n == 3:
        return None
    return polys[0]


def _save_table(run, stem: str, centers, columns: dict) -> None:
    if "csv" in run.config.formats:
        run.save(f"{stem}.csv", field_csv(centers, columns))
    if "json" in run.config.formats:
        run.save(f"{stem}.json", dumps({"y": centers, **columns}))


def _save_image(run, stem: str, image, region=None, points=None) -> None:
    if image.ndim != 2:
        return
    run.save(f"{stem}.pgm", pgm(image))
    if region is not None and "svg" in run.config.formats:
        run.save(f"{stem}.svg", svg(region.occupancy, region.spec.window, points))


@cli.command()
@click.pass_context
def amoeba(ctx):
    """Sample and rasterize the amoeba; report complement components."""
    run = _run(ctx, "amoeba")
    items = _inputs(run, (LaurentPolynomial, PointCloud))
    cloud, region = _region(run, items)
    run.save("amoeba_cloud.csv", cloud_csv(cloud.points))
    run.save("amoeba_region.json", dumps({**region.to_dict(), "occupancy": region.occupancy.astype(int)}))
    _save_image(run, "amoeba_region", region.occupancy, region, cloud.points)

    components = []
    for comp in complement_components(region):
        violations = convexity_check_region(comp, region)
        components.append(
            {
                "label": comp.label,
                "size": comp.size,
                "truncated": comp.truncated,
                "violations": len(violations),
                "examples": [vars(v) for v in violations[:5]],
            }
        )
    summary = {"points": len(cloud), "cloud": cloud.meta, "components": components}

    P = _hypersurface(items)
    if P is not None:
        field = membership_field(P, region.spec, threads=run.config.threads, seed=run.config.seed)
        _save_table(run, "membership_field", region.spec.centers(), {"value": field.values})
        check = membership_consistency(field, region)
        summary["membership"] = {"tau": field.tau, "consistent": check.consistent, **vars(check)}
        if not check.consistent:
            logger.warning("raster and membership field disagree: %s", vars(check))
    run.save("amoeba_components.json", dumps(summary))
    click.echo(f"{len(cloud)} points, {region.cell_count} cells, {len(components)} complement component(s)")


@cli.command()
@click.pass_context
def ronkin(ctx):
    """Ronkin function on the raster grid."""
    run = _run(ctx, "ronkin")
    P = _inputs(run, LaurentPolynomial)[0]
    field = _field(run, P, _spec(run, P.n))
    centers = field.spec.centers()
    _save_table(run, "ronkin_field", centers, {"N": field.values, "err_est": field.err_est, "quad_N": field.quad_N})
    _save_image(run, "ronkin_heatmap", field.values)
    summary = {
        "polynomial": str(P),
        **field.spec.to_dict(),
        "flagged_cells": field.flagged,
        "max_err_est": float(field.err_est.max()),
        "max_quad_N": int(field.quad_N.max()),
    }
    run.save("ronkin_summary.json", dumps(summary))
    click.echo(f"{field.spec.cell_count} cells, {field.flagged} flagged")


@cli.command()
@click.pass_context
def measure(ctx):
    """Laplacian mass of N_P compared with the amoeba raster."""
    run = _run(ctx, "measure")
    P = _inputs(run, LaurentPolynomial)[0]
    field = _field(run, P, _spec(run, P.n))
    mass = laplacian_mass(field)
    _, region = _region(run, [P])
    report = support_compare(mass, region, run.config.tau_mass)
    _save_table(run, "mass_grid", field.spec.centers(), {"mass": mass.mass})
    _save_image(run, "mass_grid", mass.mass)
    run.save("measure_report.json", dumps({**mass.to_dict(), "support": vars(report)}))
    click.echo(f"total mass {mass.total:.6g}, outside fraction {report.outside_mass_fraction:.3g}")


@cli.command()
@click.pass_context
def order(ctx):
    """Order (affine gradient) of N_P on each complement component."""
    run = _run(ctx, "order")
    P = _inputs(run, LaurentPolynomial)[0]
    field = _field(run, P, _spec(run, P.n))
    _, region = _region(run, [P])
    orders = component_orders(field, region)
    run.save("orders.json", dumps({"polynomial": str(P), "components": [vars(o) for o in orders]}))
    for o in orders:
        click.echo(f"component {o.label}: order {tuple(round(v, 6) for v in o.order)}")


def _y_points(run, n: int) -> np.ndarray:
    if run.config.y_points:
        return np.array(run.config.y_points, dtype=np.float64).reshape(-1, n)
    return _spec(run, n).centers()


@cli.command()
@click.pass_context
def apmean(ctx):
    """Bohr mean M_f(y) of log|f|; Laurent inputs are pulled back and compared with N_P."""
    run = _run(ctx, "apmean")
    item = _inputs(run, (ExponentialSum, LaurentPolynomial))[0]
    P = item if isinstance(item, LaurentPolynomial) else None
    f = pullback_exponential(P) if P is not None else item
    ladder = run.config.ladder_spec()
    quad = run.config.quad_spec(f.n)
    ys = _y_points(run, f.n)
    means = np.array([mean_log_modulus(f, y, ladder, quad) for y in ys])
    columns = {"M": means}
    report = {"function": str(f), "periodic": f.integer_lattice() is not None, "ladder": list(ladder.s_values)}
    if P is not None:
        columns["N"] = np.array([ronkin_value(P, y, quad, run.config.fiberwise) for y in ys])
        report["pullback_deviation"] = pullback_consistency(P, ys, quad, ladder)
    if lattice_polynomial(f, ys[0]) is None:
        tables = []
        for y in ys:
            result = log_modulus_ladder(f, y, ladder)
            tables.append({"y": y, "table": result.table, "spread": result.spread, "extrapolated": result.extrapolated})
        report["ladders"] = tables
    _save_table(run, "apmean", ys, columns)
    run.save("apmean_report.json", dumps(report))
    click.echo(f"{len(ys)} point(s)")


def _one_variable_sum(run) -> ExponentialSum:
    item = _inputs(run, (ExponentialSum, LaurentPolynomial))[0]
    f = pullback_exponential(item) if isinstance(item, LaurentPolynomial) else item
    if f.n != 1:
        raise UsageError("zero localization is for one-variable sums")
    return f


@cli.command()
@click.pass_context
def zeros(ctx):
    """Zeros of a one-variable exponential sum in the configured box."""
    run = _run(ctx, "zeros")
    f = _one_variable_sum(run)
    if run.config.box is None or len(run.config.box) != 4:
        raise PreconditionError("zeros needs 'box': [x0, x1, y0, y1] in the config")
    sample = zeros_in_box(f, Box(*run.config.box))
    report = {"function": str(f), **sample.to_dict(), "count": sample.count}
    box = sample.box
    try:
        raster = zero_amoeba(sample, GridSpec(((box.y0, box.y1),), run.config.grid_h))
        report["zero_amoeba"] = {**raster.to_dict(), "occupancy": raster.occupancy.astype(int)}
    except UsageError as e:
        logger.info("no zero-amoeba raster: %s", e)
    run.save("zeros.json", dumps(report))
    click.echo(f"{sample.count} zero(s) with multiplicity")


@cli.command()
@click.pass_context
def density(ctx):
    """Zero density in a horizontal strip, compared with the slope jumps of M_f."""
    run = _run(ctx, "density")
    f = _one_variable_sum(run)
    if run.config.strip is None or len(run.config.strip) != 2:
        raise PreconditionError("density needs 'strip': [y0, y1] in the config")
    y0, y1 = run.config.strip
    ladder = run.config.ladder_spec()
    estimate = zero_density(f, (y0, y1), ladder, quad=run.config.quad_spec(1), threads=run.config.threads)
    steps = max(3, int(round((y1 - y0) / run.config.grid_h)) + 1)
    jump = slope_jump_measure(f, np.linspace(y0, y1, steps), ladder, run.config.quad_spec(1))
    report = {"function": str(f), **estimate.to_dict(), "slope_jump_mass": jump.mass_in(y0, y1)}
    _save_table(run, "slope_jump", jump.y.reshape(-1, 1), {"M": jump.mean, "mass": jump.mass})
    run.save("density.json", dumps(report))
    click.echo(f"density {estimate.estimates[-1][1]:.6g} at s={ladder.s_max:g}, slope jump {report['slope_jump_mass']:.6g}")


@cli.command()
@click.pass_context
def capscan(ctx):
    """Supporting caps and Hartogs witnesses on the raster of Γ."""
    run = _run(ctx, "capscan")
    _, region = _region(run, _inputs(run, (LaurentPolynomial, PointCloud)))
    c = run.config
    report = scan_caps(region, c.cap_k, threads=c.threads)
    conversions = []
    for cert in report.certificates:
        try:
            fig = cap_to_hartogs(cert, region)
        except NotConvertibleError as e:
            conversions.append({"certificate": cert.to_dict(), "error": str(e)})
            continue
        check = hartogs_check(region, fig)
        conversions.append({"certificate": cert.to_dict(), "figure": fig.to_dict(), "witness": [check.figure_clear, check.hull_meets]})
    out = {**report.to_dict(), "conversions": conversions}
    q = c.hartogs_q if c.hartogs_q is not None else region.spec.n - c.cap_k
    if 1 <= q <= region.spec.n - 1:
        figures = scan_hartogs(region, q)
        out["hartogs_scan"] = {"q": q, "family": FigureFamily().to_dict(), "witnesses": [f.to_dict() for f in figures]}
    run.save("capscan.json", dumps(out))
    click.echo(f"k={c.cap_k}: {len(report.certificates)} cap certificate(s)")


@cli.command()
@click.pass_context
def verify(ctx):
    """Run the acceptance suite; exits nonzero if any criterion fails."""
    run = _run(ctx, "verify")
    result = run_suite(run.config)
    run.save("verify.json", dumps(result))
    for item in result["criteria"]:
        click.echo(f"{item['id']}. {item['name']}: {'pass' if item['passed'] else 'FAIL'}")
    if not result["passed"]:
        ctx.exit(VERIFY_FAILED)


@cli.command()
@click.pass_context
def report(ctx):
    """Collect every output sidecar in the output directory into summary.json."""
    run = _run(ctx, "report")
    entries = []
    for path in sorted(glob.glob(os.path.join(run.config.out_dir, "*.meta.json"))):
        name = os.path.basename(path)[: -len(".meta.json")]
        if name == "summary.json":
            continue
        with open(path, encoding="utf-8") as fh:
            entries.append({"file": name, **json.load(fh)})
    run.save("summary.json", dumps({"outputs": entries}))
    click.echo(f"{len(entries)} output(s)")
