"""Command-line interface: ``mvlda {simulate,fit,scree,project,components,convert}``.

Results go to CSV files with an SVG figure next to each; diagnostics are
printed as ``key=value`` lines. Failures print one ``error: <code> <message>``
line on stderr and exit with 1 (invalid input) or 2 (numerical failure).
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, plotting, report
from .covariance import FlipFlopConfig, flip_flop
from .discriminant import fit as fit_model
from .discriminant import mahalanobis_decomposition, scores_vec
from .errors import MvldaError, NumericalError, ValidationError
from .io import (
    ModelFile,
    ensure_parent,
    load_epochs,
    load_model,
    save_model,
    write_bundle,
    write_csv,
)
from .linalg import spd_factorize
from .synth import (
    GENERATOR,
    MatrixNormalSpec,
    ar1_covariance,
    make_rng,
    planted_difference,
    sample_erp_epochs,
    sample_matrix_normal,
)
from .wavelet import WaveletConfig, component_waveform, wavelet_epochs

logger = logging.getLogger("mvlda")


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _emit(**items) -> None:
    for key, value in items.items():
        if isinstance(value, float):
            value = f"{value:.17g}"
        print(f"{key}={value}")


def _svg_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".svg")


def _load_matrix(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"cannot parse matrix file {path}: {exc}") from exc


# --- simulate -------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.erp:
        epochs = sample_erp_epochs(args.n1, args.n2, n_channels=args.J, seed=args.seed,
                                   n_samples=args.samples, amplitude=args.amplitude)
    else:
        if args.K < 1 or args.J < 1:
            raise ValidationError("K and J must be positive")
        if args.sigma_row:
            sigma_l = _load_matrix(args.sigma_row)
        else:
            sigma_l = ar1_covariance(args.K, args.rho_row)
        if args.sigma_col:
            sigma_r = _load_matrix(args.sigma_col)
        else:
            sigma_r = ar1_covariance(args.J, args.rho_col)
        if sigma_l.shape != (args.K, args.K) or sigma_r.shape != (args.J, args.J):
            raise ValidationError("covariance factor files do not match K and J")
        # canonical split: ||Sigma_R||_F = 1 with the scale moved into Sigma_L
        scale = np.linalg.norm(sigma_r)
        sigma_l = spd_factorize(sigma_l * scale)
        sigma_r = spd_factorize(sigma_r / scale)
        delta = np.zeros((args.K, args.J))
        if args.lambdas:
            rng = make_rng(np.random.SeedSequence([args.seed, 1]))
            delta = planted_difference(args.lambdas, sigma_l, sigma_r, rng)
        spec = MatrixNormalSpec(delta / 2, -delta / 2, sigma_l, sigma_r, args.n1, args.n2,
                                args.seed)
        info = {
            "generator": GENERATOR,
            "kind": "matrix-normal",
            "seed": args.seed,
            "K": args.K,
            "J": args.J,
            "n1": args.n1,
            "n2": args.n2,
            "lambdas": list(args.lambdas or []),
            "rho_row": None if args.sigma_row else args.rho_row,
            "rho_col": None if args.sigma_col else args.rho_col,
            "sigma_row": sigma_l.matrix.tolist() if args.sigma_row else None,
            "sigma_col": sigma_r.matrix.tolist() if args.sigma_col else None,
        }
        names = [f"ch{i + 1:02d}" for i in range(args.J)]
        epochs = sample_matrix_normal(spec, names, None, None, info)
    path = write_bundle(epochs, ensure_parent(args.out))
    _emit(bundle=str(path), n=epochs.n, K=epochs.K, J=epochs.J,
          n1=int(np.sum(epochs.labels == 1)), n2=int(np.sum(epochs.labels == 2)))
    return 0


# --- fit --------------------------------------------------------------------

def _wavelet_config(args, n_samples: int) -> WaveletConfig:
    padded = args.padded_length
    if padded is None:
        padded = max(1 << args.levels, 1 << max(n_samples - 1, 1).bit_length())
    return WaveletConfig(args.filter_taps, args.levels, args.boundary, padded)


def cmd_fit(args) -> int:
    epochs = load_epochs(args.bundle)
    config = FlipFlopConfig(args.tol, args.max_iter, args.ridge, args.floor_ratio)
    wavelet = mask = None
    offset = None
    data = epochs
    if args.wavelet:
        wavelet = _wavelet_config(args, epochs.K)
        data, mask = wavelet_epochs(epochs, wavelet, baseline_samples=args.baseline_samples)
        offset = args.time_offset_ms
        if offset is None:
            offset = float((epochs.generator_info or {}).get("onset_ms", 0.0))
    cov = flip_flop(data, config)
    model = fit_model(data, cov, args.rank_tol)
    _, total = mahalanobis_decomposition(model)
    model_file = ModelFile(
        model=model,
        covariance=cov.canonical(),
        flip_flop=config,
        rank_tol=args.rank_tol,
        wavelet=wavelet,
        mask=mask,
        baseline_samples=args.baseline_samples if args.wavelet else 0,
        channel_names=data.channel_names,
        row_names=data.row_names,
        sample_rate_hz=epochs.sample_rate_hz,
        time_offset_ms=offset,
    )
    save_model(model_file, ensure_parent(args.out))
    _emit(model=str(args.out), K=model.K, J=model.J, n1=model.n1, n2=model.n2, Q=model.Q,
          iterations=cov.iterations, converged=str(cov.converged).lower(),
          fixed_point_residual=float(cov.fixed_point_residual),
          mahalanobis_total=float(total))
    if not cov.converged:
        print(f"warning: flip-flop did not converge in {config.max_iter} sweeps",
              file=sys.stderr)
    return 0


# --- scree ------------------------------------------------------------------

def cmd_scree(args) -> int:
    mf = load_model(args.model)
    lam = mf.model.lam
    rows = report.scree_rows(lam)
    out = ensure_parent(args.out)
    write_csv(out, ("q", "lambda", "cumulative_fraction", "elbow"), rows)
    r = report.elbow(lam)
    plotting.scree_plot(lam, _svg_path(out), elbow=r or None)
    if lam.size == 0:
        print("warning: model has no discriminant directions (Q=0)", file=sys.stderr)
    _emit(csv=str(out), svg=str(_svg_path(out)), Q=int(lam.size), elbow=r)
    return 0


# --- project ----------------------------------------------------------------

def _check_axes(axes, q: int) -> list:
    if not axes:
        raise ValidationError("no axes requested")
    bad = [a for a in axes if not 1 <= a <= q]
    if bad:
        raise ValidationError(f"axis {bad[0]} out of range: the model has Q={q}")
    return list(axes)


def _model_inputs(mf: ModelFile, bundle):
    epochs = load_epochs(bundle)
    if mf.wavelet is not None:
        epochs, _ = wavelet_epochs(epochs, mf.wavelet, mf.mask, mf.baseline_samples)
    if (epochs.K, epochs.J) != (mf.model.K, mf.model.J):
        raise ValidationError(
            f"bundle is {epochs.K}x{epochs.J} but the model expects {mf.model.K}x{mf.model.J}"
        )
    return epochs


def cmd_project(args) -> int:
    mf = load_model(args.model)
    model = mf.model
    axes = args.axes or list(range(1, min(model.Q, 2) + 1))
    axes = _check_axes(axes, model.Q)
    epochs = _model_inputs(mf, args.bundle)
    idx = np.asarray(axes) - 1
    scores = scores_vec(epochs.trials, model)[:, idx]
    out = ensure_parent(args.out)
    header = ["trial", "label"] + [f"score_axis{a}" for a in axes]
    write_csv(out, header, ([i, int(c)] + list(s) for i, (c, s) in
                            enumerate(zip(epochs.labels, scores))))
    means = report.mean_scores(model, axes)
    plane = axes[:2]
    if len(plane) == 1:
        pts = np.column_stack([scores[:, 0], np.zeros(len(scores))])
        mpts = np.column_stack([means[:, 0], np.zeros(2)])
        plotting.factorial_plane(pts, epochs.labels, mpts, _svg_path(out), (axes[0], "-"))
    else:
        plotting.factorial_plane(scores[:, :2], epochs.labels, means[:, :2],
                                 _svg_path(out), tuple(plane))
    items = {"csv": str(out), "svg": str(_svg_path(out)), "n": epochs.n}
    for c in (1, 2):
        for a, s in zip(axes, means[c - 1]):
            items[f"mean{c}_axis{a}"] = float(s)
    _emit(**items)
    return 0


# --- components ---------------------------------------------------------------

def cmd_components(args) -> int:
    mf = load_model(args.model)
    model = mf.model
    q_list = args.q or list(range(1, min(model.Q, 3) + 1))
    q_list = _check_axes(q_list, model.Q)
    idx = np.asarray(q_list) - 1
    names = [f"component{q}" for q in q_list]
    out = ensure_parent(args.out)
    svg = _svg_path(out)

    if args.domain == "row":
        values = report.delta_rows(model)[:, idx]
        labels = mf.row_names or tuple(str(i) for i in range(model.K))
        write_csv(out, ["index", "name"] + names,
                  ([i, labels[i]] + list(v) for i, v in enumerate(values)))
        plotting.component_lines(np.arange(model.K), values, names, svg, "row index")
    elif args.domain == "col":
        values = report.delta_cols(model)[:, idx]
        labels = mf.channel_names or tuple(str(i) for i in range(model.J))
        write_csv(out, ["index", "name"] + names,
                  ([i, labels[i]] + list(v) for i, v in enumerate(values)))
        if len(q_list) >= 2:
            plotting.component_map(values[:, :2], labels, svg, tuple(q_list[:2]))
        else:
            plotting.component_lines(np.arange(model.J), values, names, svg, "column index")
    else:
        if mf.wavelet is None or mf.mask is None:
            raise ValidationError("domain=time needs a model fitted with --wavelet")
        waves = np.column_stack([component_waveform(model, q, mf.mask, mf.wavelet)
                                 for q in q_list])
        rate = mf.sample_rate_hz or 1000.0
        times = (mf.time_offset_ms or 0.0) + np.arange(waves.shape[0]) * 1000.0 / rate
        write_csv(out, ["time_ms"] + names, ([t] + list(w) for t, w in zip(times, waves)))
        plotting.component_lines(times, waves, names, svg, "time (ms)")
    _emit(csv=str(out), svg=str(svg), domain=args.domain,
          components=",".join(str(q) for q in q_list))
    return 0


# --- convert ------------------------------------------------------------------

def cmd_convert(args) -> int:
    epochs = load_epochs(args.source)
    path = write_bundle(epochs, ensure_parent(args.out))
    _emit(bundle=str(path), n=epochs.n, K=epochs.K, J=epochs.J)
    return 0


class _Parser(argparse.ArgumentParser):
    """Usage errors follow the single-line ``error:`` convention and exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: usage {_one_line(message)}", file=sys.stderr)
        sys.exit(ValidationError.exit_status)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mvlda",
        description="Descriptive two-class discriminant analysis of matrix-valued data "
                    "under a separable covariance model.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic epoch bundle")
    p.add_argument("out", help="manifest path (payload goes to <stem>.f64)")
    p.add_argument("--K", type=int, default=8, help="rows per trial")
    p.add_argument("--J", type=int, default=6, help="columns (channels) per trial")
    p.add_argument("--n1", type=int, default=100)
    p.add_argument("--n2", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambdas", type=_float_list, default=None,
                   help="planted discriminant eigenvalues, e.g. 25,9,1")
    p.add_argument("--rho-row", type=float, default=0.5, help="AR(1) row correlation")
    p.add_argument("--rho-col", type=float, default=0.3, help="AR(1) column correlation")
    p.add_argument("--sigma-row", help="CSV file with the K x K row covariance")
    p.add_argument("--sigma-col", help="CSV file with the J x J column covariance")
    p.add_argument("--erp", action="store_true",
                   help="time-domain evoked-response epochs (rows are samples at 1 kHz)")
    p.add_argument("--samples", type=int, default=1000, help="samples per epoch with --erp")
    p.add_argument("--amplitude", type=float, default=2.0, help="evoked amplitude with --erp")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="estimate the covariance factors and discriminant axes")
    p.add_argument("bundle", help="epoch bundle manifest or long-format CSV")
    p.add_argument("-o", "--out", required=True, help="model file to write (JSON)")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--floor-ratio", type=float, default=1e-10)
    p.add_argument("--rank-tol", type=float, default=None,
                   help="relative singular value cutoff (default max(K,J)*1e-12)")
    w = p.add_argument_group("wavelet front end")
    w.add_argument("--wavelet", action="store_true",
                   help="treat rows as time samples; transform and select coefficients")
    w.add_argument("--filter-taps", type=int, default=8)
    w.add_argument("--levels", type=int, default=5)
    w.add_argument("--boundary", choices=("zero-pad", "periodic"), default="zero-pad")
    w.add_argument("--padded-length", type=int, default=None,
                   help="default: next power of two >= epoch length")
    w.add_argument("--baseline-samples", type=int, default=0,
                   help="subtract the mean of the first N samples per channel (default off)")
    w.add_argument("--time-offset-ms", type=float, default=None,
                   help="time of the first sample, used for the time axis")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("scree", help="eigenvalue table and scree plot")
    p.add_argument("model")
    p.add_argument("out", help="CSV path; the SVG is written next to it")
    p.set_defaults(func=cmd_scree)

    p = sub.add_parser("project", help="trial scores on discriminant axes")
    p.add_argument("model")
    p.add_argument("bundle")
    p.add_argument("out", help="CSV path; the SVG is written next to it")
    p.add_argument("--axes", type=_int_list, default=None, help="1-based axes (default 1,2)")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("components", help="discriminant components of the mean difference")
    p.add_argument("model")
    p.add_argument("out", help="CSV path; the SVG is written next to it")
    p.add_argument("--q", type=_int_list, default=None, help="1-based components (default 1,2,3)")
    p.add_argument("--domain", choices=("row", "col", "time"), default="col")
    p.set_defaults(func=cmd_components)

    p = sub.add_parser("convert", help="convert a long-format CSV into an epoch bundle")
    p.add_argument("source")
    p.add_argument("out")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except MvldaError as exc:
        print(f"error: {exc.code} {_one_line(exc)}", file=sys.stderr)
        return exc.exit_status
    except np.linalg.LinAlgError as exc:
        print(f"error: {NumericalError.code} {_one_line(exc)}", file=sys.stderr)
        return NumericalError.exit_status
    except OSError as exc:
        print(f"error: io_error {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
