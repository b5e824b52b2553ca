"""Command-line front end: validate, solve, posterior, value, oracle, serve.

Every command is a thin wrapper over the library; no numbers are computed
here.  Exit codes: 0 success, 1 domain error (invalid model, impossible
evidence, illegal move), 2 usage error (bad flags, unknown names or states).
"""

import argparse
import itertools
import sys
from pathlib import Path

from .jsonio import canonical_json
from .model import (
    Evidence,
    IllegalObservationError,
    ModelError,
    ModelFormatError,
    ModelValidationError,
    ObservationScenario,
    UnknownVariableError,
    check_evidence,
    parse_model,
    scenario_legal,
)
from .oracle import oracle_meu
from .solve import bn_posterior, solve_meu
from .voi import METHODS, voi_report


class UsageError(Exception):
    """A flag value does not fit the model or the flag grammar."""


def fmt(x: float) -> str:
    return repr(float(x))


def _load_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read model file: {e}") from None


def load_model(path: str):
    return parse_model(_load_text(path))


def _split_csv(spec: str) -> list[str]:
    return [item.strip() for item in spec.split(",") if item.strip()]


def parse_evidence_flag(diagram, specs) -> Evidence:
    pairs: dict[str, str] = {}
    for spec in specs or []:
        for item in _split_csv(spec):
            var, sep, state = item.partition("=")
            if not sep or not var or not state:
                raise UsageError(f"bad evidence item {item!r}; expected Var=state")
            pairs[var] = state
    evidence = Evidence(pairs)
    try:
        check_evidence(diagram, evidence)
    except ModelError as e:
        raise UsageError(str(e)) from None
    return evidence


def parse_set_index(token: str, flag: str) -> int:
    if token.startswith("I_"):
        try:
            k = int(token[2:])
        except ValueError:
            k = -1
        if k >= 0:
            return k
    raise UsageError(f"bad {flag} value {token!r}; expected I_k with k >= 0")


def parse_move_flag(diagram, specs) -> ObservationScenario:
    placements: dict[str, int] = {}
    for spec in specs or []:
        var, sep, tail = spec.partition(":to=")
        if not sep or not var:
            raise UsageError(f"bad move {spec!r}; expected X:to=I_k")
        placements[var] = parse_set_index(tail, "--move")
    scenario = ObservationScenario(placements)
    ok, reason = scenario_legal(diagram, scenario)
    if not ok:
        raise IllegalObservationError(reason)
    return scenario


def _require_variables(diagram, names, what: str) -> None:
    for name in names:
        try:
            diagram.variable(name)
        except UnknownVariableError:
            raise UsageError(f"unknown {what} {name!r}") from None


def cmd_validate(args) -> int:
    text = _load_text(args.model)
    try:
        parse_model(text)
    except ModelValidationError as e:
        for v in e.violations:
            print(f"{v.rule}: {v.message}")
        return 1
    except ModelFormatError as e:
        print(f"format: {e}")
        return 1
    print("ok")
    return 0


def _print_policy(policy) -> None:
    print(f"policy {policy.decision}")
    if not policy.context:
        print(f"  -> {policy.actions[int(policy.table)]}")
        return
    for idx in itertools.product(*(range(len(s)) for s in policy.context_states)):
        left = ",".join(
            f"{v}={policy.context_states[k][idx[k]]}" for k, v in enumerate(policy.context)
        )
        print(f"  {left} -> {policy.actions[int(policy.table[idx])]}")


def cmd_solve(args) -> int:
    diagram = load_model(args.model)
    evidence = parse_evidence_flag(diagram, args.evidence)
    solution = solve_meu(diagram, evidence)
    if args.json:
        sys.stdout.write(canonical_json(solution.to_jsonable()))
        return 0
    print(f"meu {fmt(solution.meu)}")
    print(f"evidence_probability {fmt(solution.evidence_probability)}")
    print(f"propagations {solution.propagations}")
    for name in sorted(solution.policies):
        _print_policy(solution.policies[name])
    return 0


def cmd_posterior(args) -> int:
    diagram = load_model(args.model)
    targets = _split_csv(args.targets)
    if not targets:
        raise UsageError("--targets needs at least one variable")
    _require_variables(diagram, targets, "target")
    evidence = parse_evidence_flag(diagram, args.evidence)
    shown_p = False
    for t in targets:
        marginal, p_e = bn_posterior(diagram, (t,), evidence)
        if not shown_p:
            print(f"evidence_probability {fmt(p_e)}")
            shown_p = True
        print(t)
        for state, value in zip(diagram.states(t), marginal):
            print(f"  {state} {fmt(value)}")
    return 0


def cmd_value(args) -> int:
    diagram = load_model(args.model)
    evidence = parse_evidence_flag(diagram, args.evidence)
    if args.decision not in diagram.decision_order:
        raise UsageError(
            f"unknown decision {args.decision!r}; "
            f"decisions: {', '.join(diagram.decision_order)}"
        )
    candidates = _split_csv(args.candidates)
    if not candidates:
        raise UsageError("--candidates needs at least one variable")
    source = parse_set_index(args.to, "--to") if args.to else None
    report = voi_report(
        diagram, args.decision, candidates, evidence, method=args.method, source=source
    )
    if args.json:
        sys.stdout.write(canonical_json(report.to_jsonable()))
        return 0
    print(f"decision {report.decision}")
    print(f"baseline {fmt(report.baseline)}")
    print(f"propagations {report.propagations}")
    for c in report.candidates:
        if c.legal:
            print(
                f"candidate {c.name} voi {fmt(c.voi)} euo {fmt(c.euo)} "
                f"method {c.method} propagations {c.propagations}"
            )
        else:
            print(f"candidate {c.name} illegal: {c.reason}")
    return 0


def cmd_oracle(args) -> int:
    diagram = load_model(args.model)
    evidence = parse_evidence_flag(diagram, args.evidence)
    base = oracle_meu(diagram, evidence)
    if not args.move:
        print(f"meu {fmt(base.meu)}")
        print(f"evidence_probability {fmt(base.evidence_probability)}")
        return 0
    scenario = parse_move_flag(diagram, args.move)
    moved = oracle_meu(diagram, evidence, scenario)
    print(f"meu {fmt(moved.meu)}")
    print(f"evidence_probability {fmt(moved.evidence_probability)}")
    print(f"base {fmt(base.meu)}")
    print(f"voi {fmt(moved.meu - base.meu)}")
    return 0


def cmd_serve(args) -> int:
    from .service import run_server

    run_server(host=args.host, port=args.port, state_dir=args.state_dir)
    return 0


def _add_evidence_flag(sub) -> None:
    sub.add_argument(
        "--evidence",
        action="append",
        metavar="X=s,...",
        help="comma-separated Var=state assignments (flag may repeat)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idvoi",
        description="influence-diagram decision support: MEU and value of information",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("validate", help="check a model document")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = subs.add_parser("solve", help="maximum expected utility and policies")
    p.add_argument("model")
    _add_evidence_flag(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = subs.add_parser("posterior", help="posterior marginals of target variables")
    p.add_argument("model")
    p.add_argument("--targets", required=True, metavar="A,B")
    _add_evidence_flag(p)
    p.set_defaults(func=cmd_posterior)

    p = subs.add_parser("value", help="myopic value of information report")
    p.add_argument("model")
    p.add_argument("--decision", required=True, metavar="D_i")
    p.add_argument("--candidates", required=True, metavar="A,B")
    _add_evidence_flag(p)
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--to", metavar="I_k", help="source placement for table expansion")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_value)

    p = subs.add_parser("oracle", help="exhaustive-enumeration cross-check")
    p.add_argument("model")
    _add_evidence_flag(p)
    p.add_argument(
        "--move",
        action="append",
        metavar="X:to=I_k",
        help="observation move to price (flag may repeat)",
    )
    p.set_defaults(func=cmd_oracle)

    p = subs.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--state-dir", default=None, help="directory for step logs")
    p.set_defaults(func=cmd_serve)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
