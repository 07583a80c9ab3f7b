"""
Command-line surface

Every subcommand writes its report to stdout and returns an exit status.
Errors print `error[<CODE>]: <message>` to stderr; usage errors exit 2, model
errors exit 1.
"""
import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config
from core.benchmark import run_length_benchmark, fit_power_law, plot_benchmark
from core.errors import EngineError, UsageError, ModelError, ProgramSyntaxError
from core.explainer import (explain, format_support_graph, to_dot,
                            check_exclusiveness_bruteforce, check_independence)
from core.em import LearnConfig, learn, goal_probability, viterbi, METHODS
from core.parameters import init_parameters, load_parameters, format_parameters
from core.program import parse_program, parse_observations, validate, Diagnostic
from core.reader import parse_term
from core.run_store import RunStore
from core.sampler import sample_goals
from core.terms import Compound, format_term
from utils.logger import setup_logger, set_verbosity

logger = setup_logger(__name__)


def resolve_program_path(path):
    """A file path, or the name of a bundled program under data/programs"""
    if os.path.exists(path):
        return path
    bundled = Config.get_program_path(path)
    if os.path.exists(bundled):
        return str(bundled)
    raise UsageError(f"Program file not found: {path}")


def read_text(path, kind):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"Cannot read {kind} file {path}: {e.strerror}")


def write_text(path, text):
    try:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
    except OSError as e:
        raise UsageError(f"Cannot write {path}: {e.strerror}")


def load_program(args):
    program = parse_program(read_text(resolve_program_path(args.program), 'program'))
    if getattr(args, 'params', None):
        load_parameters(read_text(args.params, 'parameter'), program.params)
    return program


def parse_goal(text):
    try:
        goal = parse_term(text)
    except ProgramSyntaxError as e:
        raise UsageError(f"Bad goal {text!r}: {e.message}")
    if not isinstance(goal, Compound):
        raise UsageError(f"Goal {format_term(goal)} is not an atom")
    return goal


def cmd_learn(args, out):
    program = parse_program(read_text(resolve_program_path(args.program), 'program'))
    observations = parse_observations(read_text(args.observations, 'observation'))
    if len(observations) == 0:
        raise UsageError(f"No observations in {args.observations}")
    try:
        cfg = LearnConfig(epsilon=args.epsilon, max_iterations=args.max_iters,
                          init_mode=args.init, seed=args.seed, jobs=args.jobs)
    except ValueError as e:
        raise UsageError(str(e))
    params = None
    if args.params:
        params = init_parameters(program, cfg.init_mode, cfg.seed)
        load_parameters(read_text(args.params, 'parameter'), params)
    result = learn(program, observations, cfg, params=params, method=args.method)

    trace = "".join(f"iter {m} loglik {Config.format_probability(value)}\n"
                    for m, value in enumerate(result.trace))
    parameters = format_parameters(result.params)
    if args.trace:
        write_text(args.trace, trace)
    else:
        out.write(trace)
    if args.out_params:
        write_text(args.out_params, parameters)
    else:
        out.write(parameters)
    if args.db:
        RunStore(args.db).record_learn_run(os.path.basename(args.program), result,
                                           os.path.basename(args.observations), cfg)
    if not result.converged:
        logger.warning(f"Stopped after {result.iterations} iterations without converging")
    return Config.EXIT_OK


def cmd_prob(args, out):
    program = load_program(args)
    p = goal_probability(program, parse_goal(args.goal))
    out.write(f"{Config.format_probability(p)}\n")
    return Config.EXIT_OK


def cmd_sample(args, out):
    program = load_program(args)
    goal = parse_goal(args.goal)
    if args.count < 1:
        raise UsageError(f"Invalid count: {args.count}. Must be >= 1")
    for sample in sample_goals(program, goal, args.count, seed=args.seed):
        out.write("fail\n" if sample is None else f"{sample}\n")
    return Config.EXIT_OK


def cmd_viterbi(args, out):
    program = load_program(args)
    graph = explain(program, parse_goal(args.goal))
    explanation, p = viterbi(graph, program.params)
    out.write(f"{explanation}\n")
    out.write(f"probability {Config.format_probability(p)}\n")
    return Config.EXIT_OK


def cmd_explain(args, out):
    program = load_program(args)
    graph = explain(program, parse_goal(args.goal))
    out.write(format_support_graph(graph))
    if args.dot:
        write_text(args.dot, to_dot(graph))
    return Config.EXIT_OK


def cmd_check(args, out):
    program = load_program(args)
    report = validate(program)
    for text in args.goal or ():
        goal = parse_goal(text)
        try:
            graph = explain(program, goal)
        except ModelError as e:
            report.append(Diagnostic('error', e.code, str(e.message)))
            continue
        report.extend(check_independence(graph))
        report.extend(check_exclusiveness_bruteforce(program, goal, cap=args.cap))
    for diagnostic in report:
        out.write(f"{diagnostic}\n")
    if report.ok:
        out.write(f"ok ({len(report.warnings)} warnings)\n")
        return Config.EXIT_OK
    return Config.EXIT_MODEL_ERROR


def cmd_history(args, out):
    store = RunStore(args.db)
    for run_id, program, method, iterations, converged, loglik, created in store.get_runs(args.program):
        status = "converged" if converged else "stopped"
        out.write(f"{run_id} {program} {method} {iterations} {status} "
                  f"{Config.format_probability(loglik)} {created}\n")
    return Config.EXIT_OK


def cmd_bench(args, out):
    if args.nonterminals < 1:
        raise UsageError("Need at least one nonterminal")
    nonterminals = tuple(f"n{i}" for i in range(args.nonterminals))
    points = run_length_benchmark(nonterminals=nonterminals, lengths=tuple(args.lengths),
                                  sentences=args.sentences, seed=args.seed, style=args.style,
                                  repeats=args.repeats)
    for p in points:
        out.write(f"length {p.length} size {p.graph_size} gem {p.gem_seconds:.6f} "
                  f"oracle {p.oracle_seconds:.6f}\n")
    if len(points) >= 2:
        lengths = [p.length for p in points]
        size_fit = fit_power_law(lengths, [p.graph_size for p in points])
        out.write(f"size exponent {size_fit.slope:.3f} r2 {size_fit.r_squared:.4f}\n")
    if args.plot:
        plot_benchmark(points, args.plot)
    if args.db:
        RunStore(args.db).record_benchmark(f"pcfg-{args.style}-{args.nonterminals}", points)
    return Config.EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog='plpgem', description=f"{Config.APP_NAME} {Config.VERSION}")
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="log progress on stderr (-vv for debug records)")
    sub = parser.add_subparsers(dest='command', required=True)

    def with_program(p, goal=True):
        p.add_argument('program', help="program file or bundled program name")
        if goal:
            p.add_argument('goal', help="goal atom, e.g. \"btype(a)\"")
        p.add_argument('--params', help="parameter file")
        return p

    p = sub.add_parser('learn', help="estimate parameters from observations")
    p.add_argument('program')
    p.add_argument('observations')
    p.add_argument('--params', help="initial parameter file")
    p.add_argument('--out-params', help="write final parameters here instead of stdout")
    p.add_argument('--trace', help="write the iteration trace here instead of stdout")
    p.add_argument('--epsilon', type=float, default=Config.EPSILON)
    p.add_argument('--max-iters', type=int, default=Config.MAX_ITERATIONS)
    p.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
    p.add_argument('--init', choices=Config.INIT_MODES, default=Config.DEFAULT_INIT_MODE)
    p.add_argument('--method', choices=METHODS, default='gem')
    p.add_argument('--jobs', type=int, default=1)
    p.add_argument('--db', help="record the run in this sqlite file")
    p.set_defaults(func=cmd_learn)

    with_program(sub.add_parser('prob', help="probability of a ground goal")).set_defaults(func=cmd_prob)

    p = with_program(sub.add_parser('sample', help="draw goal instances"))
    p.add_argument('-n', '--count', type=int, default=1)
    p.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
    p.set_defaults(func=cmd_sample)

    with_program(sub.add_parser('viterbi', help="most likely explanation")).set_defaults(func=cmd_viterbi)

    p = with_program(sub.add_parser('explain', help="print the support graph"))
    p.add_argument('--dot', help="also write Graphviz text to this file")
    p.set_defaults(func=cmd_explain)

    p = with_program(sub.add_parser('check', help="static and search-time diagnostics"), goal=False)
    p.add_argument('--goal', action='append', help="ground goal to search (repeatable)")
    p.add_argument('--cap', type=int, default=10000, help="explanation cap for exclusiveness checks")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser('history', help="list recorded learning runs")
    p.add_argument('--db', default=str(Config.get_db_path()))
    p.add_argument('--program')
    p.set_defaults(func=cmd_history)

    p = sub.add_parser('bench', help="time gEM against Inside-Outside")
    p.add_argument('--lengths', type=int, nargs='+', default=[4, 6, 8])
    p.add_argument('--nonterminals', type=int, default=3)
    p.add_argument('--sentences', type=int, default=3)
    p.add_argument('--style', choices=('span', 'threaded'), default='span')
    p.add_argument('--repeats', type=int, default=3)
    p.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
    p.add_argument('--plot', help="save a time-per-iteration plot (PNG)")
    p.add_argument('--db', help="record timings in this sqlite file")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return Config.EXIT_USAGE_ERROR if e.code else Config.EXIT_OK
    set_verbosity(args.verbose)
    try:
        return args.func(args, out)
    except UsageError as e:
        err.write(f"error[{e.code}]: {e.message}\n")
        return Config.EXIT_USAGE_ERROR
    except EngineError as e:
        logger.info(f"{args.command} failed: {e}", exc_info=True)
        err.write(f"error[{e.code}]: {e.message}\n")
        return Config.EXIT_MODEL_ERROR
