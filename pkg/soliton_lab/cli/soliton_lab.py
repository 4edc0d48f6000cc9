#!/usr/bin/env python3
import argparse
import logging
import math
from pathlib import (
    Path,
)
import sys
import time
from typing import (
    Any,
    Callable,
    Dict,
    Optional,
    Sequence,
)
import warnings

import numpy as np

import soliton_lab
from soliton_lab.cli.run_config import (
    ReportBundle,
    RunConfig,
    load_config,
    provenance,
    render_report,
    save_report,
    write_csv,
)
from soliton_lab.exceptions import (
    CertificationFailure,
    ConfigError,
    InvalidArgument,
    SolitonLabException,
)
from soliton_lab.ground_state import (
    GroundState,
    extrapolated_amplitude,
    refined,
    solve_ground_state,
    tail_decay_rate,
)
from soliton_lab.linear_dynamics import (
    DecayReport,
    free_matrix_operator,
    log_norm_slope,
    measure_local_decay,
    stability_trace,
)
from soliton_lab.linearized_ops import (
    assemble_H,
)
from soliton_lab.nonlinear_dynamics import (
    NLS_DT_LIMIT,
    ShootingResult,
    evolve_nls,
    fit_departure_law,
    orbit_distance,
    shoot_manifold,
    soliton_deviation,
    sweep_quadratic,
)
from soliton_lab.projections import (
    ChannelLayout,
    build_projections,
    build_root_family,
)
from soliton_lab.radial_core import (
    RADIAL,
    RadialGrid,
    make_grid,
)
from soliton_lab.settings import (
    SOLITON_LAB_LOG_LEVEL,
    SOLITON_LAB_TRACEBACK_LIMIT,
)
from soliton_lab.spectral_analysis import (
    birman_schwinger_count,
    birman_schwinger_spectrum,
    certify_spectrum,
    compute_sigma,
    eigenpair_imaginary,
    interval_clear,
    spectral_margin,
    threshold_margin,
)
from soliton_lab.utils import (
    relative_error,
)

logger = logging.getLogger(__name__)

COMMANDS = (
    'ground',
    'spectrum',
    'bs-count',
    'threshold-check',
    'evolve-linear',
    'evolve-nls',
    'shoot',
    'sweep-quadratic',
    'certify-all',
)

command_help = """Pipeline to run, one of:
ground           - Ground state profile (CSV r,phi,dphi_dr,dphi_dalpha) and its checks
spectrum         - Spectral report: E0, lambda1, sigma, root space, strip spectrum
bs-count         - Birman-Schwinger counts for K_- and K_+ at n and 2n
threshold-check  - Margin of the K_- spectrum from one, certified under grid doubling
evolve-linear    - Linear stability of the P_s flow and weighted local decay
evolve-nls       - Radial NLS run from the soliton, optionally kicked along f+
shoot            - Stable-manifold shooting for one epsilon
sweep-quadratic  - Shooting over the epsilon list and the log h* vs log eps slope
certify-all      - ground, spectrum, threshold-check and evolve-linear in one bundle
"""

MASS_SCALING_ALPHAS = (0.5, 1.0, 2.0)
MASS_SCALING_TOL = 1e-5
RESIDUAL_BOUND = 1e-8
EXPECTED_BS_COUNTS = (1, 4)
MARGIN_FLOOR = 0.05
GROWTH_BOUND = 10.0
SLOPE_FRACTION = 0.01
STABILITY_HORIZON = 50.0
DECAY_BAND = (-1.9, -1.1)
FREE_EXPONENT = -1.5
FREE_EXPONENT_TOL = 0.1
GROWTH_RATE_TOL = 0.02
DEPARTURE_OFFSETS = (0.1, 0.03, 0.01)
QUADRATIC_BAND = (1.7, 2.3)


class _UsageParser(argparse.ArgumentParser):

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f'{self.prog}: error: {message}\n')


def _parse_cli_args():
    sys.exit(_parse_args(sys.argv[1:]))


def run_command(argv) -> int:
    return _parse_args(list(argv))


def _build_parser() -> argparse.ArgumentParser:
    parser = _UsageParser(
        prog='soliton-lab',
        description='Stability certificates and stable-manifold shooting for the cubic NLS',
        formatter_class=argparse.RawTextHelpFormatter
    )
    parser.add_argument('command', choices=COMMANDS, metavar='command', help=command_help)
    parser.add_argument(
        '--version',
        action='version',
        version=f'{soliton_lab.__version__}+commit.{soliton_lab.__commit__}',
    )
    parser.add_argument('--config', help='JSON run configuration', default=None)
    parser.add_argument('--alpha', help='Soliton frequency alpha0', type=float)
    parser.add_argument('--n', help='Grid nodes for profiles and dynamics', type=int)
    parser.add_argument('--n-dense', help='Grid nodes for dense eigenproblems', type=int,
                        dest='n_dense')
    parser.add_argument('--rmax', help='Grid radius in units of 1/alpha', type=float)
    parser.add_argument('--seed', help='Seed for random probes and R0 profiles', type=int)
    parser.add_argument('--ell-max', help='Highest angular sector counted', type=int,
                        dest='ell_max')
    parser.add_argument('--epsilon', help='Perturbation amplitude(s)', type=float, nargs='+')
    parser.add_argument('--trun', help='Run time of NLS trials', type=float)
    parser.add_argument(
        '--scheme',
        help='Splitting scheme for NLS runs',
        choices=('strang', 'yoshida4'),
        default='strang',
    )
    parser.add_argument('--workers', help='Worker pool size for sweeps', type=int)
    parser.add_argument(
        '--out',
        help="CSV file to write. Defaults to '<command>.csv'; the report goes next to it.",
        default=None,
    )
    parser.add_argument('--report', help='JSON report path', default=None)
    parser.add_argument(
        '--pretty-json',
        help='Output JSON in pretty format.',
        action='store_true'
    )
    parser.add_argument(
        '--traceback',
        help='Show python traceback on error instead of recording it in the report',
        action='store_true'
    )
    parser.add_argument(
        '--traceback-limit',
        help='Set the traceback limit for error messages',
        type=int,
    )
    parser.add_argument(
        '--record-timing',
        help='Add wall-clock time to the report (reports are no longer byte-identical)',
        action='store_true'
    )
    parser.add_argument('-v', '--verbose', help='Log at DEBUG level', action='store_true')
    return parser


def exc_handler_to_dict(exception: Exception, component: str,
                        file_path: Optional[str] = None) -> Dict:
    err_dict: Dict = {
        "type": type(exception).__name__,
        "component": component,
        "severity": "error",
        "message": str(exception).strip('"'),
    }
    if hasattr(exception, 'message'):
        err_dict.update({
            'message': exception.message,  # type: ignore
            'formattedMessage': str(exception)
        })
    if getattr(exception, 'details', None):
        err_dict['details'] = exception.details  # type: ignore
    if getattr(exception, 'exit_time', None) is not None:
        err_dict['exitTime'] = exception.exit_time  # type: ignore
    if getattr(exception, 'lineno', None) is not None:
        err_dict['sourceLocation'] = {
            'file': file_path,
            'lineno': exception.lineno,  # type: ignore
            'col_offset': getattr(exception, 'col_offset', None),
        }
    return err_dict


def _warning_dict(caught: warnings.WarningMessage) -> Dict:
    return {'type': caught.category.__name__, 'message': str(caught.message)}


class _RunContext:
    """
    Shared state of one invocation: config, output paths, cached ground states and the bundle.
    """

    def __init__(self, config: RunConfig, args: argparse.Namespace, out: Path,
                 bundle: ReportBundle):
        self.config = config
        self.args = args
        self.out = out
        self.bundle = bundle
        self.outputs: Dict[str, str] = {}
        self.resolutions: Dict[str, Any] = {}
        self._ground: Dict[int, GroundState] = {}
        self._refined: Dict[int, GroundState] = {}

    @property
    def alpha(self) -> float:
        return self.config.alpha0

    def grid(self, n: int) -> RadialGrid:
        return make_grid(self.config.r_max, n)

    def ground(self, n: Optional[int] = None) -> GroundState:
        n = n or self.config.grid.n
        if n not in self._ground:
            self._ground[n] = solve_ground_state(
                self.alpha, self.grid(n), newton_tol=self.config.solver.newton_tol
            )
        return self._ground[n]

    def dense(self) -> GroundState:
        return self.ground(self.config.grid.n_dense)

    def fine(self, gs: GroundState) -> GroundState:
        if gs.grid.n not in self._refined:
            self._refined[gs.grid.n] = refined(gs, self.config.solver.newton_tol)
        return self._refined[gs.grid.n]

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.config.experiment.seed)

    def csv_path(self, tag: str) -> Path:
        if self.args.command == tag:
            return self.out
        return self.out.with_name(f'{self.out.stem}_{tag}{self.out.suffix or ".csv"}')

    def write_csv(self, tag: str, header, columns) -> None:
        path = self.csv_path(tag)
        self.outputs[path.name] = write_csv(path, header, columns)
        logger.info("wrote %s", path)

    def record(self, name: str, results: Dict[str, Any], resolution) -> None:
        self.bundle.results[name] = results
        self.resolutions[name] = list(resolution)


def probe_profile(grid: RadialGrid, alpha: float, rng: np.random.Generator,
                  bumps: int = 3) -> np.ndarray:
    """
    A real radial profile: random Gaussian bumps within a few soliton widths of the origin.
    """
    r = grid.nodes
    centers = rng.uniform(0.0, 3.0, size=bumps) / alpha
    widths = rng.uniform(0.5, 2.0, size=bumps) / alpha
    amplitudes = rng.normal(size=bumps)
    return sum(a * np.exp(-((r - c) / w) ** 2) for a, c, w in zip(amplitudes, centers, widths))


def _run_ground(ctx: _RunContext) -> None:
    gs = ctx.ground()
    fine = ctx.fine(gs)
    if gs.residual > RESIDUAL_BOUND:
        raise CertificationFailure("ground state residual too large", {'residual': gs.residual})
    scaling = {}
    for alpha in MASS_SCALING_ALPHAS:
        grid = make_grid(ctx.config.grid.r_max_over_inv_alpha / alpha, gs.grid.n)
        scaling[alpha] = solve_ground_state(alpha, grid, ctx.config.solver.newton_tol).mass * alpha
    spread = max(relative_error(value, scaling[1.0]) for value in scaling.values())
    if spread > MASS_SCALING_TOL:
        raise CertificationFailure("mass scaling alpha |phi|^2 not constant", {'spread': spread})

    ctx.write_csv('ground', ('r', 'phi', 'dphi_dr', 'dphi_dalpha'),
                  (gs.grid.nodes, gs.phi, gs.dphi_dr, gs.dphi_dalpha))
    ctx.record('ground', {
        'alpha': gs.alpha,
        'amplitude': gs.amplitude,
        'amplitude_extrapolated': extrapolated_amplitude(gs, fine),
        'shooting_amplitude': gs.shooting_amplitude,
        'mass': gs.mass,
        'residual': gs.residual,
        'tail_decay_rate': tail_decay_rate(gs),
        'mass_scaling': {repr(a): value for a, value in scaling.items()},
        'mass_scaling_spread': spread,
    }, (gs.grid.n, fine.grid.n))


def _run_spectrum(ctx: _RunContext) -> None:
    gs = ctx.dense()
    fine = ctx.fine(gs)
    solver = ctx.config.solver
    report = certify_spectrum(gs, fine, ctx.config.experiment.ell_max,
                              kernel_tol=solver.kernel_tol, eig_tol=solver.eig_tol)
    ctx.record('spectrum', report.as_dict(), report.resolution)


def _run_bs_count(ctx: _RunContext) -> None:
    gs = ctx.ground()
    fine = ctx.fine(gs)
    ell_max = ctx.config.experiment.ell_max
    counts = {}
    for which in ('minus', 'plus'):
        coarse = birman_schwinger_count(gs, which, ell_max)
        refined_count = birman_schwinger_count(fine, which, ell_max)
        if coarse.count != refined_count.count:
            raise CertificationFailure(
                f"K_{which} count differs between resolutions",
                {'n': coarse.count, 'n_fine': refined_count.count},
            )
        counts[which] = coarse

    kernels, sectors, values = [], [], []
    for index, which in enumerate(('minus', 'plus')):
        for ell, spectrum in birman_schwinger_spectrum(gs, which, ell_max).items():
            top = spectrum[:5]
            kernels += [index] * top.size
            sectors += [ell] * top.size
            values += list(top)
    ctx.write_csv('bs-count', ('kernel', 'ell', 'eigenvalue'), (kernels, sectors, values))
    ctx.record('bs_count', {
        'bs_count_minus': counts['minus'].count,
        'bs_count_plus': counts['plus'].count,
        'per_sector_minus': counts['minus'].per_sector,
        'per_sector_plus': counts['plus'].per_sector,
        'eigenvalues_above_one_minus': counts['minus'].eigenvalues_above_one,
        'eigenvalues_above_one_plus': counts['plus'].eigenvalues_above_one,
        'ell_max': ell_max,
    }, (gs.grid.n, fine.grid.n))
    found = (counts['minus'].count, counts['plus'].count)
    if found != EXPECTED_BS_COUNTS:
        raise CertificationFailure(
            f"Birman-Schwinger counts {found}, expected {EXPECTED_BS_COUNTS}", {'alpha': gs.alpha}
        )


def _run_threshold(ctx: _RunContext) -> None:
    gs = ctx.ground()
    fine = ctx.fine(gs)
    ell_max = ctx.config.experiment.ell_max
    margin = threshold_margin(gs, fine, ell_max)
    clear = interval_clear(gs, ctx.config.solver.kernel_tol)
    ctx.record('threshold', {
        'margin': margin,
        'margin_fine': spectral_margin(fine, ell_max),
        'interval_clear': clear,
        'ell_max': ell_max,
    }, (gs.grid.n, fine.grid.n))
    if margin < MARGIN_FLOOR:
        raise CertificationFailure("K_- spectrum too close to one", {'margin': margin})
    if not clear:
        raise CertificationFailure("eigenvalue of L_- or L_+ inside (0, alpha^2)")


def _check_linear_results(sigma: float, sup_ratio: float, worst_slope: float,
                          decay: DecayReport, control: DecayReport) -> None:
    if sup_ratio > GROWTH_BOUND or worst_slope > SLOPE_FRACTION * sigma:
        raise CertificationFailure(
            "P_s evolution is not bounded",
            {'sup_ratio': sup_ratio, 'slope': worst_slope, 'sigma': sigma},
        )
    if decay.growth_rate is None:
        raise CertificationFailure("unstable-mode growth rate could not be fitted")
    growth_error = relative_error(decay.growth_rate, sigma)
    if growth_error > GROWTH_RATE_TOL:
        raise CertificationFailure(
            "unstable-mode growth rate does not match sigma",
            {'growth_rate': decay.growth_rate, 'sigma': sigma, 'relative_error': growth_error},
        )
    if not DECAY_BAND[0] <= decay.fitted_exponent <= DECAY_BAND[1]:
        raise CertificationFailure(
            "local decay exponent outside the expected band",
            {'exponent': decay.fitted_exponent, 'band': DECAY_BAND},
        )
    if abs(control.fitted_exponent - FREE_EXPONENT) > FREE_EXPONENT_TOL:
        raise CertificationFailure(
            "free-flow control does not reproduce the t^-3/2 decay",
            {'exponent': control.fitted_exponent, 'target': FREE_EXPONENT},
        )


def _run_evolve_linear(ctx: _RunContext) -> None:
    gs = ctx.dense()
    grid = gs.grid
    alpha2 = gs.alpha ** 2
    mode = compute_sigma(gs)
    pairs = (eigenpair_imaginary(gs, 1, mode), eigenpair_imaginary(gs, -1, mode))
    family = build_root_family(gs, layout=ChannelLayout.RADIAL)
    projections = build_projections(gs, family, pairs)
    H = assemble_H(gs, RADIAL)

    rng = ctx.rng()
    probes = []
    for _ in range(ctx.config.experiment.n_probes):
        profile = probe_profile(grid, gs.alpha, rng)
        probes.append(np.stack((profile, profile)).astype(complex))
    horizon = STABILITY_HORIZON / alpha2
    sup_ratio, worst_slope = 0.0, -math.inf
    for probe in probes:
        times, norms = stability_trace(H, projections, probe, horizon)
        sup_ratio = max(sup_ratio, float(norms.max()))
        worst_slope = max(worst_slope, log_norm_slope(times, norms))

    decay_T = ctx.config.experiment.decay_T / alpha2
    decay = measure_local_decay(H, projections, probes[0], decay_T)
    control = measure_local_decay(free_matrix_operator(grid, gs.alpha), None, probes[0], decay_T)
    ctx.write_csv('evolve-linear', ('t', 'weighted_norm'), (decay.times, decay.weighted_norms))
    ctx.record('evolve_linear', {
        'sigma': mode.sigma,
        'sup_norm_ratio': sup_ratio,
        'max_log_slope': worst_slope,
        'decay': decay.as_dict(),
        'free_exponent': control.fitted_exponent,
        'probes': len(probes),
    }, (grid.n, grid.n))

    _check_linear_results(mode.sigma, sup_ratio, worst_slope, decay, control)


def _check_tracking(results: Sequence[ShootingResult]) -> None:
    lost = [result for result in results if not result.tracks_orbit]
    if lost:
        raise CertificationFailure(
            "stabilized run does not track the soliton orbit",
            {'epsilon': [r.epsilon for r in lost], 'survived': [r.survived for r in lost],
             'max_residual': [r.max_residual for r in lost]},
        )


def _epsilon(ctx: _RunContext) -> float:
    return ctx.config.experiment.epsilon_list[0]


def _run_evolve_nls(ctx: _RunContext) -> None:
    gs = ctx.ground()
    alpha2 = gs.alpha ** 2
    T = ctx.config.experiment.T_run or 20.0 / alpha2
    psi0 = gs.phi.astype(complex)
    kick = ctx.args.epsilon[0] if ctx.args.epsilon else 0.0
    if kick:
        f_plus = eigenpair_imaginary(gs, 1).right_vec[0]
        psi0 = psi0 + kick * f_plus / gs.grid.norm(f_plus)
    dt = min(ctx.config.solver.ode_dt, NLS_DT_LIMIT) / alpha2
    trajectory = evolve_nls(psi0, T, dt, grid=gs.grid, alpha=gs.alpha, scheme=ctx.args.scheme)
    deviation = soliton_deviation(trajectory, gs)
    distance = orbit_distance(trajectory, gs)
    ctx.write_csv('evolve-nls', ('t', 'mass', 'energy', 'soliton_deviation', 'orbit_distance'),
                  (trajectory.times, trajectory.mass, trajectory.energy, deviation, distance))
    results = trajectory.as_dict()
    results.update({
        'kick': kick,
        'max_soliton_deviation': float(deviation.max()),
        'max_orbit_distance': float(distance.max()),
    })
    ctx.record('evolve_nls', results, (gs.grid.n, gs.grid.n))


def _shoot_options(ctx: _RunContext) -> Dict[str, Any]:
    alpha2 = ctx.alpha ** 2
    return {
        'T_run': ctx.config.experiment.T_run,
        'exit_threshold': ctx.config.experiment.exit_threshold,
        'dt': min(ctx.config.solver.ode_dt, NLS_DT_LIMIT) / alpha2,
        'scheme': ctx.args.scheme,
    }


def _run_shoot(ctx: _RunContext) -> None:
    gs = ctx.ground()
    profile = probe_profile(gs.grid, gs.alpha, ctx.rng())
    epsilon = _epsilon(ctx)
    offsets = tuple(fraction * epsilon for fraction in DEPARTURE_OFFSETS)
    result = shoot_manifold(gs, profile, epsilon, offsets=offsets, **_shoot_options(ctx))
    ctx.write_csv('shoot', ('t', 'b_plus', 'residual_norm'),
                  (result.b_plus_times, result.b_plus_series, result.residual_norms))
    results = result.as_dict()
    try:
        law = fit_departure_law(result.departure_time, result.h_star)
        results['departure_law'] = law._asdict()
    except InvalidArgument as exc:
        logger.warning("departure law not fitted: %s", exc)
        results['departure_law'] = None
    ctx.record('shoot', results, (gs.grid.n, gs.grid.n))
    _check_tracking([result])


def _run_sweep(ctx: _RunContext) -> None:
    gs = ctx.ground()
    profile = probe_profile(gs.grid, gs.alpha, ctx.rng())
    sweep = sweep_quadratic(gs, profile, ctx.config.experiment.epsilon_list,
                            workers=ctx.args.workers, **_shoot_options(ctx))
    widths = [result.bracket_width for result in sweep.results]
    ctx.write_csv('sweep-quadratic', ('epsilon', 'h_star', 'bracket_width'),
                  (sweep.epsilons, sweep.h_stars, widths))
    ctx.record('sweep_quadratic', sweep.as_dict(), (gs.grid.n, gs.grid.n))
    _check_tracking(sweep.results)
    if not QUADRATIC_BAND[0] <= sweep.slope <= QUADRATIC_BAND[1]:
        raise CertificationFailure(
            "h_star does not scale quadratically in epsilon",
            {'slope': sweep.slope, 'band': QUADRATIC_BAND},
        )


def _run_certify_all(ctx: _RunContext) -> None:
    for handler in (_run_ground, _run_spectrum, _run_threshold, _run_evolve_linear):
        handler(ctx)


HANDLERS: Dict[str, Callable[[_RunContext], None]] = {
    'ground': _run_ground,
    'spectrum': _run_spectrum,
    'bs-count': _run_bs_count,
    'threshold-check': _run_threshold,
    'evolve-linear': _run_evolve_linear,
    'evolve-nls': _run_evolve_nls,
    'shoot': _run_shoot,
    'sweep-quadratic': _run_sweep,
    'certify-all': _run_certify_all,
}


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is None:
        config = RunConfig()
    else:
        try:
            config = load_config(args.config)
        except FileNotFoundError as exc:
            raise ConfigError(f"Config file not found: {args.config}") from exc
    try:
        return config.override(
            alpha0=args.alpha, n=args.n, n_dense=args.n_dense, r_max_over_inv_alpha=args.rmax,
            seed=args.seed, ell_max=args.ell_max, epsilon_list=args.epsilon, T_run=args.trun,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse_args(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1

    if args.traceback_limit is not None:
        sys.tracebacklimit = args.traceback_limit
    elif SOLITON_LAB_TRACEBACK_LIMIT is not None:
        sys.tracebacklimit = SOLITON_LAB_TRACEBACK_LIMIT
    else:
        # only the report should carry error details, not a python traceback
        sys.tracebacklimit = 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else SOLITON_LAB_LOG_LEVEL,
        format='%(levelname)s %(name)s: %(message)s',
    )

    try:
        config = _load_config(args)
    except ConfigError as exc:
        if args.traceback:
            raise
        bundle = ReportBundle(args.command, RunConfig())
        bundle.errors.append(exc_handler_to_dict(exc, 'config', args.config))
        print(render_report(bundle, args.pretty_json))
        return exc.exit_code

    out = Path(args.out) if args.out is not None else Path(f'{args.command}.csv')
    report_path = Path(args.report) if args.report is not None else out.with_suffix('.json')
    bundle = ReportBundle(args.command, config)
    ctx = _RunContext(config, args, out, bundle)

    start = time.perf_counter()
    code = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        try:
            HANDLERS[args.command](ctx)
        except SolitonLabException as exc:
            if args.traceback:
                raise
            bundle.errors.append(exc_handler_to_dict(exc, args.command))
            code = exc.exit_code
    bundle.warnings = [_warning_dict(w) for w in caught]
    wall_clock = time.perf_counter() - start if args.record_timing else None
    bundle.provenance = provenance(config, ctx.outputs, ctx.resolutions, wall_clock)

    output_path = save_report(bundle, report_path, pretty=args.pretty_json)
    print(f"Results saved to {output_path}")
    return code
