import sys
import yaml
import logging
import argparse
from pathlib import Path
from dataclasses import fields, replace
from typing import Any, Dict, List, Optional, Tuple  # noqa

from fqess import logger
from fqess import (ConfigError, DimensionError, FqessException, HamiltonianError, KernelError, ShotStarvationError,
                   StagnationError)
from fqess.sim.lcu import build_plan, plan_to_dict
from fqess.sim.pauli import estimate_resources, load_hamiltonian, oracle_spectrum, shift
from fqess.solver import (SolverConfig, min_iterations_to_accuracy, noise_replicas, resolve_bias, solve_spectrum)
from fqess.baselines import (OptimizerSettings, SsvqeConfig, VqdConfig, default_ssvqe_weights, ssvqe_solve,
                             ssvqe_target, vqd_solve)
from fqess.experiment import (DEFAULT_ITERATIONS, HARDWARE_HAMILTONIAN, ExperimentParams, ExperimentTrace,
                              TwoLevelHamiltonian, excited_state_run, oracle_levels, run_experiment)
from fqess.output import RunManifest, write_csv, write_json, write_manifest
from fqess._version import __version__

EXIT_OK = 0
EXIT_CONVERGENCE = 2
EXIT_INPUT = 3

COMPARE_MAX_LEVELS = 4

_SOLVER_FLAGS = {
    'bias': 'bias',
    'k': 'k',
    'k_max': 'k_max',
    'tol': 'energy_tolerance',
    'path': 'apply_path',
    'noise': 'noise',
    'noise_mode': 'noise_mode',
    'shots': 'shots',
    'seed': 'seed',
    'initial_state': 'initial_state',
    'reference': 'deflation_reference',
}


def main() -> None:
    sys.exit(run())


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # Setup logger
    setup_logging(args.logging_level)

    if not args.subparser_name:
        parser.print_help()
        return EXIT_INPUT

    try:
        return COMMANDS[args.subparser_name](args)
    except (HamiltonianError, ConfigError, DimensionError, yaml.YAMLError, OSError) as e:
        logger.error('Input error: %s', e)
        return EXIT_INPUT
    except (StagnationError, KernelError, ShotStarvationError) as e:
        logger.error('Convergence failure: %s', e)
        return EXIT_CONVERGENCE
    except FqessException as e:
        logger.error('%s', e)
        return EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='fqess full quantum excited-state solver')
    subparsers = parser.add_subparsers(help='sub-command help', dest='subparser_name')

    parser_spectrum = subparsers.add_parser('spectrum',
                                            help='Solve every level of one Hamiltonian or of a sweep.')
    parser_compare = subparsers.add_parser('compare',
                                           help='Overlay FQESS, VQD and SSVQE convergence traces.')
    parser_experiment = subparsers.add_parser('experiment',
                                              help='Replay the two-qubit single-ancilla experiment.')
    parser_resources = subparsers.add_parser('resources',
                                             help='Report qubit and gate estimates.')

    for sub in (parser_spectrum, parser_compare, parser_resources):
        _add_input_arguments(sub)
    for sub in (parser_spectrum, parser_compare):
        _add_solver_arguments(sub)

    # spectrum subcommand
    parser_spectrum.add_argument('--replicas',
                                 type=int,
                                 dest='replicas',
                                 default=1,
                                 help='Independent noisy solves per Hamiltonian.')
    parser_spectrum.add_argument('--dump-plan',
                                 action='store_true',
                                 dest='dump_plan',
                                 help='Write the LCU plan of every input to plan.json.')
    parser_spectrum.add_argument('--k-min-study',
                                 action='store_true',
                                 dest='k_min_study',
                                 help='Write the minimum iteration count per level to kmin.csv.')

    # compare subcommand
    parser_compare.add_argument('--depth',
                                type=int,
                                dest='depth',
                                default=3,
                                help='Hardware-efficient ansatz depth for VQD and SSVQE.')
    parser_compare.add_argument('--iterations',
                                type=int,
                                dest='iterations',
                                default=500,
                                help='Optimizer steps for VQD and SSVQE.')
    parser_compare.add_argument('--compare-noise',
                                type=float,
                                dest='compare_noise',
                                default=0.1,
                                help='Noise intensity of the noisy columns; 0 disables them.')

    # experiment subcommand
    parser_experiment.add_argument('--hamiltonian',
                                   type=str,
                                   dest='hamiltonian',
                                   default=None,
                                   help='One-qubit coefficient file. Defaults to the hardware H2 coefficients.')
    parser_experiment.add_argument('--bias',
                                   type=str,
                                   dest='bias',
                                   default='auto',
                                   help="Bias lambda0, or 'auto' to recover it from the hardware angle.")
    parser_experiment.add_argument('--iterations',
                                   type=int,
                                   dest='iterations',
                                   default=DEFAULT_ITERATIONS,
                                   help='Angle-recycling iterations.')
    parser_experiment.add_argument('--shots',
                                   type=int,
                                   dest='shots',
                                   default=0,
                                   help='Shots per circuit; 0 for exact probabilities.')
    parser_experiment.add_argument('--replicas',
                                   type=int,
                                   dest='replicas',
                                   default=1,
                                   help='Independent repetitions for error bars.')
    parser_experiment.add_argument('--seed',
                                   type=int,
                                   dest='seed',
                                   default=0,
                                   help='Master seed.')
    parser_experiment.add_argument('--skip-excited',
                                   action='store_true',
                                   dest='skip_excited',
                                   help='Do not run the deflated excited-state protocol.')
    parser_experiment.add_argument('--out',
                                   type=str,
                                   dest='out',
                                   default='results',
                                   help='Output directory.')

    # Main command
    parser.add_argument('--logging-level',
                        default='info',
                        choices=['debug', 'info', 'warning', 'error'],
                        type=str.lower,
                        dest='logging_level',
                        help='Print debug logs')
    parser.add_argument('--version',
                        action='version',
                        dest='version',
                        version='{version}'.format(version=__version__))
    return parser


def _add_input_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--hamiltonian',
                        type=str,
                        nargs='+',
                        dest='hamiltonian',
                        default=None,
                        help='Coefficient file(s); the file stem becomes the label.')
    parser.add_argument('--sweep',
                        type=str,
                        dest='sweep',
                        default=None,
                        help='YAML sweep manifest with labelled Hamiltonian files.')
    parser.add_argument('--out',
                        type=str,
                        dest='out',
                        default='results',
                        help='Output directory.')


def _add_solver_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--bias', type=str, dest='bias', default=None, help="Bias lambda0 or 'auto'.")
    parser.add_argument('--k', type=str, dest='k', default=None, help="Fixed applications per level or 'auto'.")
    parser.add_argument('--k-max', type=int, dest='k_max', default=None, help='Iteration cap in tolerance mode.')
    parser.add_argument('--tol', type=float, dest='tol', default=None, help='Energy tolerance in Hartree.')
    parser.add_argument('--path', type=str, dest='path', choices=['lcu', 'direct'], default=None,
                        help='Simulate the LCU circuit or apply the operator directly.')
    parser.add_argument('--noise', type=float, dest='noise', default=None, help='Coefficient noise intensity.')
    parser.add_argument('--noise-mode', type=str, dest='noise_mode', choices=['solve', 'iteration'], default=None,
                        help='Draw the noise once per solve or at every application.')
    parser.add_argument('--shots', type=int, dest='shots', default=None, help='Shots per Pauli component; 0 exact.')
    parser.add_argument('--seed', type=int, dest='seed', default=None, help='Master seed.')
    parser.add_argument('--initial-state', type=str, dest='initial_state', default=None,
                        help="'random' or a product spec such as '0+'.")
    parser.add_argument('--reference', type=str, dest='reference', choices=['bias', 'zero'], default=None,
                        help='Energy reference subtracted before each deflation.')


def _optional_number(value: Optional[str], cast: type, name: str) -> Any:
    if value is None or value == 'auto':
        return None

    try:
        return cast(value)
    except ValueError:
        logger.error("%s must be a number or 'auto', got '%s'", name, value)
        raise ConfigError("%s must be a number or 'auto', got %r" % (name, value))


def _load_sweep(path: Path) -> Tuple[List[Tuple[str, Path]], Dict[str, Any]]:
    logger.info('Reading sweep manifest from %s', path)
    with open(path.as_posix()) as f:
        _yaml_dict = yaml.safe_load(f.read())

    if not isinstance(_yaml_dict, dict) or not isinstance(_yaml_dict.get('sweep'), list):
        logger.error("Sweep manifest %s needs a 'sweep' list", path)
        raise ConfigError("sweep manifest %s needs a 'sweep' list" % path)

    entries = []  # type: List[Tuple[str, Path]]
    for item in _yaml_dict['sweep']:
        if not isinstance(item, dict) or 'label' not in item or 'hamiltonian' not in item:
            logger.error('Sweep entry %s needs a label and a hamiltonian', item)
            raise ConfigError('sweep entry %r needs a label and a hamiltonian' % (item, ))

        # Hamiltonian paths are relative to the manifest.
        entries.append((str(item['label']), path.parent / str(item['hamiltonian'])))

    settings = _yaml_dict.get('solver') or {}
    if not isinstance(settings, dict):
        raise ConfigError("'solver' section of %s must be a mapping" % path)

    return entries, settings


def _inputs(args: argparse.Namespace) -> Tuple[List[Tuple[str, Path]], Dict[str, Any]]:
    if args.sweep:
        entries, settings = _load_sweep(Path(args.sweep))
    elif args.hamiltonian:
        entries, settings = [(Path(p).stem, Path(p)) for p in args.hamiltonian], {}
    else:
        logger.error('Either --hamiltonian or --sweep is required')
        raise ConfigError('either --hamiltonian or --sweep is required')

    if not _is_valid_sweep(entries):
        raise ConfigError('sweep is not valid')

    return entries, settings


def _is_valid_sweep(entries: List[Tuple[str, Path]]) -> bool:
    if not entries:
        logger.error('No Hamiltonian is given!')
        return False

    labels = [label for label, _ in entries]
    if len(set(labels)) != len(labels):
        logger.error('Sweep labels must be unique: %s', labels)
        return False

    for label, path in entries:
        if not path.is_file():
            logger.error("Hamiltonian file '%s' for label '%s' is not found!", path, label)
            return False

    return True


def _solver_config(args: argparse.Namespace, settings: Dict[str, Any]) -> SolverConfig:
    values = dict(settings)
    for flag, name in _SOLVER_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = value

    values['bias'] = _optional_number(values.get('bias'), float, 'bias')
    values['k'] = _optional_number(values.get('k'), int, 'k')

    known = {f.name for f in fields(SolverConfig)}
    unknown = set(values) - known
    if unknown:
        logger.error('Unknown solver settings: %s', sorted(unknown))
        raise ConfigError('unknown solver settings: %s' % sorted(unknown))

    return SolverConfig(**values)


def _manifest(subcommand: str, entries: List[Tuple[str, Path]], config: Dict[str, Any], seed: int,
              out: str) -> RunManifest:
    return RunManifest(subcommand=subcommand,
                       inputs=[path.as_posix() for _, path in entries],
                       labels=[label for label, _ in entries],
                       config=config,
                       seed=seed,
                       out=out)


def cmd_spectrum(args: argparse.Namespace) -> int:
    entries, settings = _inputs(args)
    config = _solver_config(args, settings)
    if args.replicas < 1:
        raise ConfigError('replica count must be positive, got %s' % args.replicas)

    out = Path(args.out)
    run_config = dict(config.to_dict(), replicas=args.replicas, dump_plan=args.dump_plan, k_min_study=args.k_min_study)
    manifest = _manifest('spectrum', entries, run_config, config.seed, args.out)
    write_manifest(out, manifest)
    digest = manifest.sha256

    rows, kmin_rows, plans = [], [], {}
    converged = True
    for label, path in entries:
        logger.info("Solving '%s' from %s", label, path)
        h = load_hamiltonian(path)
        oracle = oracle_spectrum(h).eigenvalues

        payload = {'label': label, 'hamiltonian': path.as_posix(), 'oracle': oracle}
        if args.replicas > 1:
            study = noise_replicas(h, config, args.replicas)
            result = study.results[0]
            means, deviations = list(study.mean), list(study.max_deviation)
            payload['replicas'] = {'energies': study.energies, 'mean': study.mean, 'max_deviation': study.max_deviation}
            converged = converged and all(r.converged for r in study.results)
        else:
            result = solve_spectrum(h, config)
            means, deviations = result.sorted_energies, [0.0] * len(result.levels)
            converged = converged and result.converged

        payload['result'] = result.to_dict()
        write_json(out / ('%s.json' % label), payload, digest)

        for level, (value, mean, deviation) in enumerate(zip(result.sorted_energies, means, deviations)):
            rows.append([label, level + 1, value, oracle[level], abs(value - oracle[level]), mean, deviation])

        if not result.converged:
            logger.error("Label '%s' has unconverged levels", label)

        if args.dump_plan:
            bias = resolve_bias(h, config)
            plans[label] = plan_to_dict(build_plan(shift(h, bias), bias))

        if args.k_min_study:
            kmin_rows.extend(_k_min_rows(label, h, config))

    write_csv(out / 'spectrum.csv', ['label', 'level', 'energy', 'oracle', 'abs_error', 'mean', 'max_deviation'], rows,
              digest)
    if args.dump_plan:
        write_json(out / 'plan.json', {'plans': plans}, digest)
    if args.k_min_study:
        write_csv(out / 'kmin.csv', ['label', 'level', 'bias', 'k_min'], kmin_rows, digest)

    return EXIT_OK if converged else EXIT_CONVERGENCE


def _k_min_rows(label: str, h: Any, config: SolverConfig) -> List[List[Any]]:
    bias = resolve_bias(h, config)
    rows = []
    for level in range(1, 2 ** h.n + 1):
        try:
            k = min_iterations_to_accuracy(h, level, config)
        except StagnationError:
            logger.warning("Level %s of '%s' never reached chemical accuracy", level, label)
            k = ''
        rows.append([label, level, bias, k])
    return rows


def cmd_compare(args: argparse.Namespace) -> int:
    entries, settings = _inputs(args)
    config = _solver_config(args, settings)
    label, path = entries[0]
    h = load_hamiltonian(path)
    oracle = sorted(oracle_spectrum(h).eigenvalues)
    levels = min(2 ** h.n, COMPARE_MAX_LEVELS)
    weights = default_ssvqe_weights(levels)
    optimizer = OptimizerSettings(max_iterations=args.iterations)

    out = Path(args.out)
    run_config = dict(config.to_dict(), depth=args.depth, iterations=args.iterations, compare_noise=args.compare_noise)
    manifest = _manifest('compare', [(label, path)], run_config, config.seed, args.out)
    write_manifest(out, manifest)

    conditions = [('noiseless', 0.0)]
    if args.compare_noise > 0:
        conditions.append(('noisy', args.compare_noise))

    rows = []
    for condition, noise in conditions:
        logger.info("Comparing algorithms on '%s' (%s)", label, condition)
        spectrum = solve_spectrum(h, replace(config, noise=noise))
        for index, solved in enumerate(spectrum.levels[:levels]):
            rows.extend(_trace_rows('fqess', condition, index + 1, solved.step.energy_trace, oracle[index]))

        vqd = vqd_solve(h, VqdConfig(levels=levels, depth=args.depth, noise=noise, seed=config.seed,
                                     optimizer=optimizer))
        for level, trace in enumerate(vqd.traces):
            rows.extend(_trace_rows('vqd', condition, level + 1, trace, oracle[level]))

        ssvqe = ssvqe_solve(h, SsvqeConfig(weights=tuple(weights), depth=args.depth, noise=noise, seed=config.seed,
                                           optimizer=optimizer))
        rows.extend(_trace_rows('ssvqe', condition, 0, ssvqe.traces[0], ssvqe_target(oracle, weights)))

    write_csv(out / 'compare.csv', ['algorithm', 'condition', 'level', 'iteration', 'value', 'target', 'abs_error'],
              rows, manifest.sha256)
    return EXIT_OK


def _trace_rows(algorithm: str, condition: str, level: int, trace: List[float], target: float) -> List[List[Any]]:
    return [[algorithm, condition, level, i + 1, value, target, abs(value - target)] for i, value in enumerate(trace)]


def _two_level(path: Optional[str]) -> TwoLevelHamiltonian:
    if path is None:
        return HARDWARE_HAMILTONIAN
    return TwoLevelHamiltonian.from_hamiltonian(load_hamiltonian(Path(path)))


def cmd_experiment(args: argparse.Namespace) -> int:
    h = _two_level(args.hamiltonian)
    params = ExperimentParams(bias=_optional_number(args.bias, float, 'bias'),
                              iterations=args.iterations,
                              shots=args.shots,
                              replicas=args.replicas,
                              seed=args.seed)

    out = Path(args.out)
    inputs = [('hardware', Path(args.hamiltonian))] if args.hamiltonian else []
    run_config = {
        'bias': params.bias,
        'iterations': params.iterations,
        'shots': params.shots,
        'replicas': params.replicas,
        'theta0': params.theta0,
        'excited': not args.skip_excited,
        'coefficients': {'identity': h.identity, 'x': h.x, 'z': h.z},
    }
    manifest = _manifest('experiment', inputs, run_config, params.seed, args.out)
    write_manifest(out, manifest)

    oracle = oracle_levels(h)
    ground = run_experiment(h, params)
    runs = [('ground', ground, oracle[0])]
    payload = {'ground': _trace_payload(ground), 'oracle': oracle}
    if not args.skip_excited:
        excited = excited_state_run(h, ground, params)
        runs.append(('excited', excited.trace, oracle[1]))
        payload['excited'] = dict(_trace_payload(excited.trace),
                                  deflated={'identity': excited.deflated.identity, 'x': excited.deflated.x,
                                            'z': excited.deflated.z})

    rows = []
    for state, trace, target in runs:
        for i, (mean, error) in enumerate(zip(trace.mean, trace.error)):
            first = trace.chains[0][i]
            replicas = [chain[i].energy for chain in trace.chains]
            rows.append([state, i + 1, mean, error, target, first.theta_in, first.p0, first.p1, first.p0_h, first.p1_h,
                         first.accepted, ';'.join(repr(float(v)) for v in replicas)])

    header = ['state', 'iteration', 'mean', 'error', 'oracle', 'theta_in', 'p0', 'p1', 'p0_h', 'p1_h', 'accepted',
              'replicas']
    write_csv(out / 'experiment.csv', header, rows, manifest.sha256)
    write_json(out / 'experiment.json', payload, manifest.sha256)
    return EXIT_OK


def _trace_payload(trace: ExperimentTrace) -> dict:
    return {
        'bias': trace.bias,
        'beta': trace.beta,
        'mean': trace.mean,
        'error': trace.error,
        'chains': [[record.__dict__ for record in chain] for chain in trace.chains],
    }


def cmd_resources(args: argparse.Namespace) -> int:
    entries, _ = _inputs(args)
    manifest = _manifest('resources', entries, {}, 0, args.out)
    write_manifest(Path(args.out), manifest)

    rows = []
    for label, path in entries:
        estimate = estimate_resources(load_hamiltonian(path))
        logger.info("'%s': %s work + %s ancilla = %s qubits, ~%s gates per application", label,
                    estimate.work_qubits, estimate.ancilla_qubits, estimate.qubit_total, estimate.gate_estimate)
        rows.append([label, estimate.work_qubits, estimate.terms, estimate.padded_terms, estimate.ancilla_qubits,
                     estimate.qubit_total, estimate.gate_estimate])

    header = ['label', 'work_qubits', 'terms', 'padded_terms', 'ancilla_qubits', 'qubit_total', 'gate_estimate']
    write_csv(Path(args.out) / 'resources.csv', header, rows, manifest.sha256)
    return EXIT_OK


COMMANDS = {
    'spectrum': cmd_spectrum,
    'compare': cmd_compare,
    'experiment': cmd_experiment,
    'resources': cmd_resources,
}


def setup_logging(level: str) -> None:
    FORMAT = "[%(asctime)s %(levelname)s %(name)s - %(message)s"
    level = getattr(logging, level.upper())
    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)

    if logger.handlers:
        return

    h = logging.StreamHandler()
    h.setLevel(level)
    h.setFormatter(logging.Formatter(FORMAT))
    logger.addHandler(h)


if __name__ == '__main__':
    main()
