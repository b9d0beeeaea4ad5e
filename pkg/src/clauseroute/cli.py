"""Command-line entry point: batches, reports, prior fitting, solver and REPL.

Exit codes: 0 success, 1 usage or configuration, 2 data or integrity, 3 transport.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence, TextIO

from .agentio import (
    AgentConfig,
    AgentConfigError,
    AgentError,
    AgentSimulator,
    Noisy,
    Oracle,
    PriorSampler,
    RunRecord,
    RunStore,
    RunStoreError,
    load_runs,
    load_template,
    query_agent,
    render_prompt,
)
from .dirkey import (
    CompileError,
    CompilerConfig,
    KeyKind,
    Mode,
    classify,
    compile_key,
    default_config,
    eval_predicate,
)
from .postcond import Label, classify as postcondition, process_mask
from .prior import ConditioningError, build_library, evaluate, permutation_test
from .prior.report import format_prior_report, parse_prior_report
from .prior.runs import RunMatrix
from .prior.selection import DEFAULT_FOLDS, DEFAULT_N_PERM, DEFAULT_TOP_K
from .report import build_report
from .solver import build_instance, dump_instance, solve
from .zoo import Endpoint, Zoo, ZooError, bundled_zoo_path, load_zoo

log = logging.getLogger("clauseroute")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3
AGENT_MODES = ("live", "oracle", "prior", "noisy")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- batches -----------------------------------------------------------------


@dataclass(frozen=True)
class KeySpec:
    key: str
    count: int | None = None
    current: str | None = None  # endpoint id/name, "none" or "cycle"


def parse_keys_file(text: str) -> list[KeySpec]:
    """One key per line: ``key[<TAB>count[<TAB>current]]``; ``#`` starts a comment line.

    The literal ``<empty>`` stands for an empty direction key.
    """
    specs = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) > 3:
            raise UsageError(f"keys file line {line_no}: expected at most 3 tab-separated fields")
        key = "" if parts[0] == "<empty>" else parts[0]
        count = None
        if len(parts) > 1 and parts[1].strip():
            try:
                count = int(parts[1])
            except ValueError:
                raise UsageError(f"keys file line {line_no}: count {parts[1]!r} is not an integer") from None
            if count < 0:
                raise UsageError(f"keys file line {line_no}: negative count")
        current = parts[2].strip() if len(parts) > 2 and parts[2].strip() else None
        specs.append(KeySpec(key, count, current))
    return specs


def run_id_for(key: str, index: int, seed: int) -> str:
    return hashlib.sha256(f"{key}\x00{index}\x00{seed}".encode("utf-8")).hexdigest()[:24]


def resolve_endpoint(zoo: Zoo, ref: str) -> Endpoint:
    if ref.isdigit():
        return zoo.endpoint(int(ref))
    return zoo.find(ref)


def _current_for(zoo: Zoo, item: KeySpec, index: int, config: CompilerConfig | None) -> Endpoint | None:
    ref = item.current
    if ref is None:
        # LF keys are relative to a current endpoint; cycle through the zoo by default
        ref = "none" if classify(item.key, config).kind is KeyKind.NF else "cycle"
    if ref == "none":
        return None
    if ref == "cycle":
        return zoo.endpoints[index % zoo.M]
    return resolve_endpoint(zoo, ref)


def load_prior(path: str | Path | None) -> PriorSampler:
    if path is None:
        text = (resources.files("clauseroute") / "data" / "nf_prior_default.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    intercept, weights, _ = parse_prior_report(text)
    return PriorSampler(weights, intercept)


def cmd_run_batch(
    zoo_path: str | Path | None,
    keys: Sequence[KeySpec],
    count_per_key: int,
    agent: str,
    out_path: str | Path,
    *,
    seed: int = 0,
    mode: Mode = Mode.COMPLETENESS,
    prior_path: str | Path | None = None,
    flip: float = 0.1,
    prompt: str = "",
    template_path: str | Path | None = None,
    agent_config: AgentConfig | None = None,
    timestamp: str | None = None,
    out: TextIO = sys.stdout,
) -> int:
    """Run ``count_per_key`` interactions per key (unless a key carries its own count).

    Runs whose id already appears in the store are skipped, so an interrupted
    batch can be rerun. Returns the number of new records.
    """
    zoo = load_zoo(zoo_path or bundled_zoo_path())
    config = default_config()
    template = load_template(template_path)
    store = RunStore(out_path)
    done = {r.run_id for r in store.load(zoo.M)}
    Path(out_path).touch()

    if agent == "live":
        if agent_config is None:
            raise AgentConfigError("live mode requires --base-url and --model")
        agent_config.api_key()
        tag = f"live:{agent_config.model}"
    elif agent == "oracle":
        behavior = Oracle(mode)
        tag = f"oracle:{mode.value}"
    elif agent == "prior":
        behavior = load_prior(prior_path)
        tag = "prior"
    elif agent == "noisy":
        behavior = Noisy(flip, mode)
        tag = f"noisy:{flip:g}"
    else:
        raise UsageError(f"unknown agent mode {agent!r}")

    lib = build_library(zoo) if agent == "prior" else None
    written = 0
    for item in keys:
        count = count_per_key if item.count is None else item.count
        for index in range(count):
            run_id = run_id_for(item.key, index, seed)
            if run_id in done:
                continue
            current = _current_for(zoo, item, index, config)
            req = render_prompt(zoo, current, prompt, item.key, template)
            if agent == "live":
                try:
                    reply = query_agent(req, agent_config)
                except AgentError:
                    print(f"batch aborted: {written} new runs kept in {out_path}", file=out)
                    raise
            else:
                # per-run generator so resumed batches reproduce the same replies
                sim = AgentSimulator(zoo, behavior, seed=int(run_id, 16), config=config, lib=lib)
                reply = sim(current, item.key)
            record = RunRecord.create(run_id, req.rendered_prompt, item.key,
                                      None if current is None else current.id, reply, zoo.M, tag, timestamp)
            store.append(record)
            done.add(run_id)
            written += 1
    print(f"{written} new runs written to {out_path}", file=out)
    return written


# --- analysis ----------------------------------------------------------------


def _load_store(store_path: str | Path, zoo: Zoo) -> list:
    if not Path(store_path).exists():
        raise RunStoreError(f"run store {store_path} does not exist")
    records = load_runs(store_path, zoo.M)
    bad = [r.run_id for r in records if not r.integrity_ok]
    if bad:
        raise RunStoreError(f"{len(bad)} record(s) fail mask re-normalization, first: {bad[0]}")
    return records


def cmd_report(store_path, zoo_path, out_dir, grid=None, out: TextIO = sys.stdout) -> int:
    zoo = load_zoo(zoo_path or bundled_zoo_path())
    records = _load_store(store_path, zoo)
    kwargs = {} if grid is None else {"grid": grid}
    bundle = build_report(records, zoo, **kwargs)
    for notice in bundle.notices:
        print(notice, file=out)
    for path in bundle.write(out_dir) if not bundle.empty else []:
        print(f"wrote {path}", file=out)
    return len(bundle.files)


def case_s_runs(records, config: CompilerConfig | None = None, nf_only: bool = True) -> RunMatrix:
    if nf_only:
        records = [r for r in records if classify(r.direction_key, config).kind is KeyKind.NF]
    return RunMatrix.from_masks([r.run_id for r in records], [r.mask.bits for r in records], [Label.CASE_S])


def cmd_fit_prior(
    store_path, zoo_path, grid, n_perm: int, seed: int, out_path,
    *, k: int = DEFAULT_TOP_K, n_folds: int = DEFAULT_FOLDS, all_keys: bool = False,
) -> str:
    zoo = load_zoo(zoo_path or bundled_zoo_path())
    runs = case_s_runs(_load_store(store_path, zoo), nf_only=not all_keys)
    lib = build_library(zoo)
    sel, metrics = evaluate(runs, lib, grid, k=k, n_folds=n_folds)
    perm = permutation_test(runs, lib, grid, n_perm=n_perm, seed=seed, k=k, n_folds=n_folds) if n_perm else None
    text = format_prior_report(sel.model, runs.n_runs, zoo.M, metrics, k, perm, sel.cv_table)
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


def cmd_permtest(store_path, zoo_path, grid, n_perm: int, seed: int, *, k: int = DEFAULT_TOP_K,
                 n_folds: int = DEFAULT_FOLDS, all_keys: bool = False) -> str:
    zoo = load_zoo(zoo_path or bundled_zoo_path())
    runs = case_s_runs(_load_store(store_path, zoo), nf_only=not all_keys)
    res = permutation_test(runs, build_library(zoo), grid, n_perm=n_perm, seed=seed, k=k, n_folds=n_folds)
    means = res.null_means
    lines = [f"runs\t{runs.n_runs}", f"n_perm\t{res.n_perm}", f"seed\t{res.seed}",
             "metric\tobserved\tnull_mean\tp_value"]
    for metric in ("auc", "topk", "spearman"):
        lines.append(f"{metric}\t{res.observed[metric]:.4f}\t{means[metric]:.4f}\t{res.p_values[metric]:.4f}")
    return "\n".join(lines) + "\n"


# --- solver and REPL ---------------------------------------------------------


def explain_selection(zoo: Zoo, key_text: str, current: Endpoint | None, mode: Mode,
                      config: CompilerConfig | None = None, explain: bool = False) -> str:
    config = config or default_config()
    key = classify(key_text, config)
    if key.kind is KeyKind.UNRECOGNIZED:
        forms = "\n".join(f"  {f}" for f in config.accepted_forms())
        return f"unrecognized direction key {key_text!r}; accepted forms:\n{forms}"
    cs = compile_key(key, zoo, mode, config)
    sel = solve(build_instance(cs, zoo, current))
    lines = [f"key: {key.kind.value}", cs.describe()]
    if key.kind is KeyKind.NF:
        lines.append("no feedback: the constraint set is vacuous; neutral expectation is Zero(C) or All(C)")
    if not sel.feasible:
        lines.append("infeasible: fewer hard-feasible endpoints than the lower budget")
        return "\n".join(lines)
    mask = process_mask(" ".join(str(int(b)) for b in sel.chosen), zoo.M)
    lines.append(f"shortlist ({sel.size}/{zoo.M}), objective {sel.objective:.4f}:")
    for i in sel.indices:
        e = zoo.endpoints[i]
        lines.append(f"  {e.id:>3}  {e.name:<28} utility {sel.per_endpoint_utility[i]:+.4f}")
    lines.append(f"postcondition: {postcondition(mask).label.value}")
    if explain:
        lines.append(explain_clauses(zoo, cs, current))
    return "\n".join(lines)


def explain_clauses(zoo: Zoo, cs, current: Endpoint | None) -> str:
    preds = [("H", p) for p in cs.hard] + [("S", p) for p, _ in cs.soft]
    if not preds:
        return "no clauses to explain"
    header = "  id  model                        " + "  ".join(f"{t}{j}" for j, (t, _) in enumerate(preds, 1))
    legend = [f"  {t}{j}: {p.name}" for j, (t, p) in enumerate(preds, 1)]
    rows = []
    for e in zoo.endpoints:
        marks = "  ".join(f"{eval_predicate(p, e, current, zoo):>{len(t + str(j))}}"
                          for j, (t, p) in enumerate(preds, 1))
        rows.append(f"  {e.id:>2}  {e.name:<28} {marks}")
    return "\n".join(["clause satisfaction:", *legend, header, *rows])


REPL_HELP = """commands:
  current <id|name|none>   set the current endpoint
  mode <shortlist|completeness>
  explain                  clause satisfaction per endpoint for the last key
  zoo                      list endpoints
  help                     this message
  quit                     leave
anything else is treated as a direction key"""


class Repl:
    def __init__(self, zoo: Zoo, agent: Callable[[Endpoint | None, str], str] | None = None,
                 config: CompilerConfig | None = None, out: TextIO = sys.stdout):
        self.zoo = zoo
        self.agent = agent
        self.config = config or default_config()
        self.out = out
        self.current: Endpoint | None = None
        self.mode = Mode.SHORTLIST
        self.last_key: str | None = None

    def say(self, text: str) -> None:
        print(text, file=self.out)

    def handle(self, line: str) -> bool:
        """Process one input line; returns False when the session should end."""
        text = line.strip()
        word, _, arg = text.partition(" ")
        word = word.lower()
        if word in ("quit", "exit"):
            return False
        if word == "help":
            self.say(REPL_HELP)
        elif word == "zoo":
            for e in self.zoo.endpoints:
                self.say(f"{e.id:>3}  {e.name}")
        elif word == "current":
            self._set_current(arg.strip())
        elif word == "mode":
            try:
                self.mode = Mode(arg.strip().lower())
                self.say(f"mode: {self.mode.value}")
            except ValueError:
                self.say("mode must be 'shortlist' or 'completeness'")
        elif word == "explain":
            self._explain()
        else:
            self._run_key(line.strip())
        return True

    def _set_current(self, ref: str) -> None:
        if not ref or ref.lower() == "none":
            self.current = None
            self.say("current endpoint: none")
            return
        try:
            self.current = resolve_endpoint(self.zoo, ref)
        except (KeyError, ZooError) as exc:
            self.say(f"no such endpoint: {exc}")
            return
        self.say(f"current endpoint: {self.current.id} {self.current.name}")

    def _run_key(self, key_text: str) -> None:
        try:
            self.say(explain_selection(self.zoo, key_text, self.current, self.mode, self.config))
        except CompileError as exc:
            self.say(f"cannot compile key: {exc}")
            return
        if classify(key_text, self.config).kind is KeyKind.UNRECOGNIZED:
            return
        self.last_key = key_text
        if self.agent is not None:
            try:
                reply = self.agent(self.current, key_text)
            except AgentError as exc:
                self.say(f"agent error: {exc}")
                return
            mask = process_mask(reply, self.zoo.M)
            post = postcondition(mask)
            flag = " (format violation)" if post.fail_flag else ""
            self.say(f"agent mask: {mask.text()}\nagent postcondition: {post.label.value}{flag}")

    def _explain(self) -> None:
        if self.last_key is None:
            self.say("no key entered yet")
            return
        key = classify(self.last_key, self.config)
        cs = compile_key(key, self.zoo, self.mode, self.config)
        self.say(explain_clauses(self.zoo, cs, self.current))


def cmd_repl(zoo_path, agent_mode: str = "none", *, stdin: TextIO = sys.stdin, out: TextIO = sys.stdout,
             agent_config: AgentConfig | None = None, prior_path=None, seed: int = 0,
             template_path=None) -> int:
    zoo = load_zoo(zoo_path or bundled_zoo_path())
    agent = None
    if agent_mode == "live":
        if agent_config is None:
            raise AgentConfigError("live mode requires --base-url and --model")
        template = load_template(template_path)

        def agent(current, d):
            return query_agent(render_prompt(zoo, current, "", d, template), agent_config)
    elif agent_mode == "oracle":
        agent = AgentSimulator(zoo, Oracle(), seed)
    elif agent_mode == "prior":
        agent = AgentSimulator(zoo, load_prior(prior_path), seed)
    elif agent_mode == "noisy":
        agent = AgentSimulator(zoo, Noisy(0.1), seed)
    repl = Repl(zoo, agent, out=out)
    interactive = stdin.isatty()
    if interactive:
        repl.say("type a direction key, or 'help'")
    while True:
        if interactive:
            out.write("> ")
            out.flush()
        line = stdin.readline()
        if not line or not repl.handle(line):
            break
    return EXIT_OK


# --- argument parsing --------------------------------------------------------


def _grid(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("grid values must be positive")
    return values


def _agent_config(args) -> AgentConfig | None:
    if not getattr(args, "base_url", None):
        return None
    if not args.model:
        raise AgentConfigError("--model is required with --base-url")
    params = {}
    if args.temperature is not None:
        params["temperature"] = args.temperature
    return AgentConfig(args.base_url, args.model, args.api_key_env, args.timeout, args.max_retries, params=params)


def _add_agent_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("live agent")
    g.add_argument("--base-url", help="chat-completion API base URL")
    g.add_argument("--model", help="agent model id")
    g.add_argument("--api-key-env", default="CLAUSEROUTE_API_KEY", help="environment variable holding the token")
    g.add_argument("--timeout", type=float, default=60.0)
    g.add_argument("--max-retries", type=int, default=3)
    g.add_argument("--temperature", type=float, default=None)
    g.add_argument("--template", help="prompt template file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clauseroute", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, store=True):
        p.add_argument("--zoo", help="model zoo CSV (default: bundled zoo)")
        if store:
            p.add_argument("--store", required=True, help="run store (JSONL)")

    p = sub.add_parser("run-batch", help="execute agent interactions and append them to a run store")
    common(p, store=False)
    p.add_argument("--keys", required=True, help="keys file: key[<TAB>count[<TAB>current]] per line")
    p.add_argument("--count", type=int, default=1, help="runs per key when the keys file gives no count")
    p.add_argument("--agent", choices=AGENT_MODES, default="oracle")
    p.add_argument("--mode", type=str.upper, choices=[m.value for m in Mode], default=Mode.COMPLETENESS.value)
    p.add_argument("--prior", help="prior report used by --agent prior (default: bundled weights)")
    p.add_argument("--flip", type=float, default=0.1, help="bit-flip probability for --agent noisy")
    p.add_argument("--prompt", default="", help="free-form user prompt preceding the direction key")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="run store to create or extend")
    _add_agent_flags(p)

    p = sub.add_parser("report", help="write statistics tables for a run store")
    common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid", type=_grid, default=None)

    for name, text in (("fit-prior", "fit the implicit no-feedback prior"),
                       ("permtest", "permutation test of the prior fit")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--grid", type=_grid, default=None, help="comma-separated R values")
        p.add_argument("--n-perm", type=int, default=DEFAULT_N_PERM if name == "permtest" else 0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
        p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
        p.add_argument("--all-keys", action="store_true", help="use Case S runs of every key, not only NF")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("solve", help="compile a direction key and print the solver shortlist")
    common(p, store=False)
    p.add_argument("--key", required=True)
    p.add_argument("--current", default="none", help="current endpoint id or name")
    p.add_argument("--mode", type=str.upper, choices=[m.value for m in Mode], default=Mode.SHORTLIST.value)
    p.add_argument("--explain", action="store_true")
    p.add_argument("--dump", help="write the MaxSMT instance to this file")

    p = sub.add_parser("repl", help="interactive shortlist exploration")
    common(p, store=False)
    p.add_argument("--agent", choices=("none", *AGENT_MODES), default="none")
    p.add_argument("--prior")
    p.add_argument("--seed", type=int, default=0)
    _add_agent_flags(p)
    return parser


def _dispatch(args, out: TextIO, stdin: TextIO) -> int:
    from .prior.selection import DEFAULT_GRID

    if args.command == "run-batch":
        keys = parse_keys_file(Path(args.keys).read_text(encoding="utf-8"))
        cmd_run_batch(args.zoo, keys, args.count, args.agent, args.out, seed=args.seed, mode=Mode(args.mode),
                      prior_path=args.prior, flip=args.flip, prompt=args.prompt, template_path=args.template,
                      agent_config=_agent_config(args), out=out)
    elif args.command == "report":
        cmd_report(args.store, args.zoo, args.out_dir, args.grid, out=out)
    elif args.command in ("fit-prior", "permtest"):
        grid = args.grid or DEFAULT_GRID
        if args.command == "fit-prior":
            text = cmd_fit_prior(args.store, args.zoo, grid, args.n_perm, args.seed, args.out, k=args.top_k,
                                 n_folds=args.folds, all_keys=args.all_keys)
        else:
            text = cmd_permtest(args.store, args.zoo, grid, args.n_perm, args.seed, k=args.top_k,
                                n_folds=args.folds, all_keys=args.all_keys)
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
        if not args.out:
            out.write(text)
    elif args.command == "solve":
        zoo = load_zoo(args.zoo or bundled_zoo_path())
        current = None if args.current == "none" else resolve_endpoint(zoo, args.current)
        mode = Mode(args.mode)
        key = classify(args.key)
        if key.kind is KeyKind.UNRECOGNIZED:
            out.write(explain_selection(zoo, args.key, current, mode) + "\n")
            return EXIT_DATA
        if args.dump:
            inst = build_instance(compile_key(key, zoo, mode), zoo, current)
            Path(args.dump).write_text(dump_instance(inst), encoding="utf-8")
        out.write(explain_selection(zoo, args.key, current, mode, explain=args.explain) + "\n")
    elif args.command == "repl":
        return cmd_repl(args.zoo, args.agent, stdin=stdin, out=out, agent_config=_agent_config(args),
                        prior_path=args.prior, seed=args.seed, template_path=args.template)
    return EXIT_OK


def main(argv: Sequence[str] | None = None, *, out: TextIO | None = None, stdin: TextIO | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, usage errors exit 1
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = out or sys.stdout
    stdin = stdin or sys.stdin
    try:
        return _dispatch(args, out, stdin)
    except (UsageError, AgentConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AgentError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ZooError, RunStoreError, ConditioningError, CompileError, KeyError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
