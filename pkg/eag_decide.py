#!/usr/bin/env python3
"""
Decision CLI for the first-order theories of real inner product, metric and normed spaces

Reads one sentence per .fol file, picks the decision procedure that covers its
fragment and reports a verdict (exit 0), a refusal with the undecidability result
behind it (exit 2), an exhausted budget (exit 3) or an input error (exit 1).

Usage:
    python eag_decide.py decide --theory ip --dim any Resources/ip-symmetry.fol
    python eag_decide.py decide --theory ns Resources/one-vs-two-norm.fol --mode model
    python eag_decide.py classify --theory ns Resources/norm-triangle.fol
    python eag_decide.py model --theory ms Resources/metric-bounded.fol --out bounded.model
    python eag_decide.py reduce peano --nat metric
    python eag_decide.py reduce so Resources/so-excluded-middle.fol --nat metric
    python eag_decide.py axioms --theory ns
"""

import os
import argparse
import logging
import sys
from typing import Optional

# Add the app directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'app'))

from services.formula_core import EagError, FormulaSyntaxError, classify_fragment, free_variables, print_formula
from services.formula_parser import Theory, parse, theory_axiom_texts
from services.ip_decision import DimensionConstraint
from services.monitoring import configure_logging, init_error_tracking, monitoring
from services.pipeline import Mode, decide_sentence, plan_route
from services.settings import get_settings, set_settings
from utils.formatting import format_fragment, format_syntax_error, format_verdict, json_line, model_path_for
from services import arith_reductions

logger = logging.getLogger('eag_decide')

REDUCTIONS = ['peano', 'mult', 'q1', 'relativize', 'so', 'so-additive']


def read_sentence(path: str, *, second_order: bool = False):
    """Parse the single sentence stored in a .fol file"""
    with open(path, encoding='utf-8') as handle:
        text = handle.read()
    try:
        return parse(text, second_order=second_order)
    except FormulaSyntaxError as e:
        raise EagError(format_syntax_error(text, e.line, e.column, e.message)) from None


def defining_formula(path: str, slots: str) -> arith_reductions.DefiningFormula:
    """A defining formula read from a file, with comma-separated slot names"""
    names = tuple(s.strip() for s in slots.split(',') if s.strip())
    return arith_reductions.DefiningFormula(read_sentence(path), names)


def nat_formula(choice: str, slots: str) -> arith_reductions.DefiningFormula:
    if choice == 'metric':
        return arith_reductions.metric_nat_formula()
    return defining_formula(choice, slots)


def run_decide(args, mode: Mode) -> int:
    sentence = read_sentence(args.file)
    dim = DimensionConstraint.parse(args.dim)
    verdict = decide_sentence(sentence, args.theory, dim, mode=mode)

    model_path = None
    if verdict.model and mode == Mode.MODEL:
        model_path = model_path_for(args.file, args.out)
        with open(model_path, 'w', encoding='utf-8') as handle:
            handle.write(verdict.model)

    if args.format == 'json-lines':
        print(json_line(verdict, model_path=model_path))
    else:
        icon = '❌' if verdict.exit_code else '✅'
        print(f"{icon} {verdict.status.value}")
        print(format_verdict(verdict, model_path=model_path))
    return verdict.exit_code


def run_classify(args) -> int:
    sentence = read_sentence(args.file)
    print(format_fragment(classify_fragment(sentence), plan_route(sentence, args.theory)))
    return 0


def run_reduce(args) -> int:
    kind = args.kind
    if kind in ('mult', 'so-additive') or (kind == 'q1' and args.mult):
        if not args.mult:
            raise EagError(f"reduce {kind} needs --mult FILE")
    mult = defining_formula(args.mult, args.mult_slots) if args.mult else None
    nat = nat_formula(args.nat, args.nat_slots)

    if kind == 'peano':
        result = arith_reductions.peano_sentence(nat)
    elif kind == 'mult':
        result = arith_reductions.mult_sentence(mult)
    else:
        if not args.file:
            raise EagError(f"reduce {kind} needs an input file")
        source = read_sentence(args.file, second_order=kind in ('relativize', 'so', 'so-additive'))
        if kind == 'q1':
            result = arith_reductions.diophantine_to_metric(source, nat=nat, mult=mult)
        elif kind == 'relativize':
            result = arith_reductions.relativize(source, nat)
        elif kind == 'so':
            result = arith_reductions.second_order_reduction(source, nat)
        else:
            result = arith_reductions.additive_reduction(source, nat, mult)

    leftover = free_variables(result)
    if leftover:
        print(f"# parameters left free: {', '.join(sorted(leftover))}")
    print(print_formula(result))
    return 0


def run_axioms(args) -> int:
    for text in theory_axiom_texts(Theory(args.theory)):
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Decision procedures for real inner product, metric and normed spaces")
    parser.add_argument('--budget', type=int, help='Cap on sign-matrix nodes per decision (EAG_BUDGET)')
    parser.add_argument('--witness-depth', type=int, help='Bisection steps when searching rational witnesses (EAG_WITNESS_DEPTH)')
    parser.add_argument('--jobs', type=int, help='Worker threads for per-dimension decisions (EAG_JOBS)')
    parser.add_argument('--log-level', help='Logging level (EAG_LOG_LEVEL)')
    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    theories = [t.value for t in Theory]

    # Decide and model
    for name, help_text in (('decide', 'Decide a sentence'), ('model', 'Decide and write the extracted model')):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument('file', help='Sentence file (.fol)')
        sub.add_argument('--theory', choices=theories, default='ip', help='Theory to decide in')
        sub.add_argument('--dim', default='any', help='any | finite | infinite | exactly:N | atmost:N')
        if name == 'decide':
            sub.add_argument('--mode', choices=[m.value for m in Mode], default=Mode.VALIDITY.value)
        sub.add_argument('--format', choices=['text', 'json-lines'], default='text')
        sub.add_argument('--out', help='Model file (defaults to the input path with a .model suffix)')

    # Classify
    classify_parser = subparsers.add_parser('classify', help='Show the fragment and the route decide would take')
    classify_parser.add_argument('file', help='Sentence file (.fol)')
    classify_parser.add_argument('--theory', choices=theories, default='ip')

    # Reduce
    reduce_parser = subparsers.add_parser('reduce', help='Emit an arithmetic reduction sentence')
    reduce_parser.add_argument('kind', choices=REDUCTIONS)
    reduce_parser.add_argument('file', nargs='?', help='Input sentence or quantifier-free formula')
    reduce_parser.add_argument('--nat', default='metric', help="'metric' or a file holding N(x)")
    reduce_parser.add_argument('--nat-slots', default='x', help='Free slot of N')
    reduce_parser.add_argument('--mult', help='File holding M(x, y, z)')
    reduce_parser.add_argument('--mult-slots', default='x,y,z', help='Free slots of M')

    # Axioms
    axioms_parser = subparsers.add_parser('axioms', help='Print the axioms of a theory')
    axioms_parser.add_argument('--theory', choices=theories, required=True)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    try:
        settings = get_settings().with_overrides(
            budget=args.budget,
            witness_depth=args.witness_depth,
            jobs=args.jobs,
            log_level=args.log_level.upper() if args.log_level else None,
        )
        set_settings(settings)
        configure_logging(settings.log_level)
        init_error_tracking()

        if args.command == 'decide':
            return run_decide(args, Mode(args.mode))
        if args.command == 'model':
            return run_decide(args, Mode.MODEL)
        if args.command == 'classify':
            return run_classify(args)
        if args.command == 'reduce':
            return run_reduce(args)
        return run_axioms(args)

    except (EagError, ValueError) as e:
        print(f"❌ {e}")
        return 1
    except OSError as e:
        print(f"❌ Cannot read input: {e}")
        return 1
    except Exception as e:
        monitoring.track_error(e, {"command": args.command})
        print(f"❌ Operation failed: {e}")
        return 1
    finally:
        for line in monitoring.summary():
            logger.debug(line)


if __name__ == "__main__":
    sys.exit(main())
