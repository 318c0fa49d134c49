"""Command-line interface: ``routemap {parse,build,query,gen-env,sample,eval}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from contextlib import ExitStack
from pathlib import Path
from typing import Callable, Sequence

from .actions import DEFAULT_THETA, check_theta
from .canonical import CanonicalPath
from .envsim import DatasetError, GeoEnvironment, InvalidEnvironment, PathDataset, generate_environment
from .envsim import sample_dataset, seeded_datasets
from .evaluate import ExplicitMethod, ImplicitMethod, eval_combined, eval_reverse, format_table, merge_reports
from .instructions import BackendError, ExtractionError, ParseError, extract_canonical, generate_instruction
from .instructions import parse_instruction
from .llm import LlmClient, LlmConfig, LlmConfigError, PromptSet, ReplayTransport, TranscriptRecorder
from .router import INSUFFICIENT, NO_PATH, UNKNOWN_NODE, RouteFailure, RouteQuery, find_route
from .topomap import MapConflict, TopoMap

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONFLICT = 4
EXIT_UNKNOWN_NODE = 5
EXIT_NO_PATH = 6
EXIT_INSUFFICIENT = 7
EXIT_CONFIG = 8
EXIT_BACKEND = 9

_ROUTE_EXIT = {UNKNOWN_NODE: EXIT_UNKNOWN_NODE, NO_PATH: EXIT_NO_PATH, INSUFFICIENT: EXIT_INSUFFICIENT}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def read_instructions(text: str) -> list[tuple[int, str]]:
    """Split an instruction file into (first line number, instruction).

    Files containing blank lines are read as blank-line separated blocks,
    others as one instruction per line.
    """
    lines = text.splitlines()
    stripped = [ln.strip() for ln in lines]
    first = next((i for i, s in enumerate(stripped) if s), None)
    last = max((i for i, s in enumerate(stripped) if s), default=None)
    if first is None or last is None:
        return []
    block_mode = any(not s for s in stripped[first:last])
    if not block_mode:
        return [(i + 1, s) for i, s in enumerate(stripped) if s]
    out = []
    current: list[str] = []
    start = 0
    for i, s in enumerate(stripped):
        if s:
            if not current:
                start = i + 1
            current.append(s)
        elif current:
            out.append((start, " ".join(current)))
            current = []
    if current:
        out.append((start, " ".join(current)))
    return out


def _theta(value: str) -> float:
    try:
        return check_theta(float(value))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def _write_atomic(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _load_json(path: str) -> dict:
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}") from None


def _emit(path: str | None, content: str) -> None:
    if path:
        _write_atomic(Path(path), content)
    else:
        sys.stdout.write(content)


class _Session:
    """Backend plumbing shared by commands: LLM client, transcripts."""

    def __init__(self, args: argparse.Namespace, stack: ExitStack):
        self.args = args
        self.stack = stack
        self._client: LlmClient | None = None

    def client(self) -> LlmClient:
        if self._client is not None:
            return self._client
        args = self.args
        try:
            config = LlmConfig.from_env()
        except LlmConfigError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from None
        configured = any(
            os.environ.get(v)
            for v in ("ROUTEMAP_LLM_API_KEY", "OPENAI_API_KEY", "ROUTEMAP_LLM_BASE_URL", "OPENAI_BASE_URL")
        )
        if args.replay_transcript is None and not configured:
            raise CliError(
                "LLM backend needs credentials (ROUTEMAP_LLM_API_KEY / OPENAI_API_KEY, or "
                "ROUTEMAP_LLM_BASE_URL) or --replay-transcript",
                EXIT_CONFIG,
            )
        try:
            prompts = PromptSet.from_file(args.prompts) if args.prompts else None
            transport = ReplayTransport.from_file(args.replay_transcript) if args.replay_transcript else None
        except (OSError, ValueError) as exc:
            raise CliError(f"LLM configuration: {exc}", EXIT_CONFIG) from None
        if args.capture_transcript:
            recorder = TranscriptRecorder(transport)
            transport = recorder
            self.stack.callback(recorder.save, args.capture_transcript)
        self._client = self.stack.enter_context(LlmClient(config, prompts, transport))
        return self._client

    def translator(self) -> Callable[[str], CanonicalPath]:
        if self.args.backend == "grammar":
            return parse_instruction
        client = self.client()
        budget = self.args.max_retries
        return lambda text: extract_canonical(text, client, budget)[0]


def _translate_file(session: _Session, path: str) -> list[tuple[int, CanonicalPath]]:
    translate = session.translator()
    out = []
    for line, text in read_instructions(_read(path)):
        try:
            out.append((line, translate(text)))
        except (ParseError, ExtractionError) as exc:
            raise CliError(f"{path}:{line}: {exc}", EXIT_PARSE) from None
        except BackendError as exc:
            raise CliError(f"{path}:{line}: backend error: {exc}", EXIT_BACKEND) from None
    return out


def cmd_parse(args: argparse.Namespace, session: _Session) -> int:
    translate = session.translator()
    status = EXIT_OK
    for line, text in read_instructions(_read(args.file)):
        try:
            path = translate(text)
        except (ParseError, ExtractionError) as exc:
            print(f"{args.file}:{line}: {exc}", file=sys.stderr)
            status = EXIT_PARSE
            continue
        except BackendError as exc:
            print(f"{args.file}:{line}: backend error: {exc}", file=sys.stderr)
            status = EXIT_BACKEND
            continue
        sys.stdout.write(json.dumps(path.to_dict(), ensure_ascii=False) + "\n")
    return status


def cmd_build(args: argparse.Namespace, session: _Session) -> int:
    topo = TopoMap()
    for line, path in _translate_file(session, args.file):
        try:
            topo.add_path(path)
        except MapConflict as exc:
            raise CliError(f"{args.file}:{line}: {exc}", EXIT_CONFLICT) from None
    _emit(args.output, topo.to_json())
    return EXIT_OK


def cmd_query(args: argparse.Namespace, session: _Session) -> int:
    try:
        topo = TopoMap.from_json(_read(args.map))
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{args.map}: not a valid map file: {exc}") from None
    conflicts = topo.check_consistency()
    if conflicts:
        for c in conflicts:
            print(f"{args.map}: {c}", file=sys.stderr)
        return EXIT_CONFLICT
    try:
        route = find_route(topo, RouteQuery(args.start, args.goal))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    except RouteFailure as exc:
        print(str(exc), file=sys.stderr)
        return _ROUTE_EXIT[exc.kind]
    if args.json:
        sys.stdout.write(json.dumps(route.to_dict(), ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(generate_instruction(route) + "\n")
    return EXIT_OK


def cmd_gen_env(args: argparse.Namespace, session: _Session) -> int:
    try:
        env = generate_environment(args.seed, args.nodes, args.designated, theta=args.theta)
    except InvalidEnvironment as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    _emit(args.output, env.to_json())
    return EXIT_OK


def cmd_sample(args: argparse.Namespace, session: _Session) -> int:
    try:
        env = GeoEnvironment.from_dict(_load_json(args.environment))
        dataset = sample_dataset(env, args.seed, args.theta)
    except (InvalidEnvironment, DatasetError) as exc:
        raise CliError(str(exc)) from None
    _emit(args.output, dataset.to_json())
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, session: _Session) -> int:
    if args.method == "implicit":
        method: ExplicitMethod | ImplicitMethod = ImplicitMethod(session.client())
    else:
        method = ExplicitMethod(session.translator(), backend=args.backend)
    if args.dataset:
        try:
            datasets = [PathDataset.from_dict(_load_json(p)) for p in args.dataset]
        except (KeyError, ValueError, TypeError) as exc:
            raise CliError(f"malformed dataset: {exc}") from None
    else:
        try:
            datasets = seeded_datasets(args.environments, args.seed, args.nodes, args.theta)
        except (InvalidEnvironment, DatasetError) as exc:
            raise CliError(str(exc)) from None
    tasks = ("reverse", "combined") if args.task == "both" else (args.task,)
    runners = {"reverse": eval_reverse, "combined": eval_combined}
    reports = [merge_reports(runners[t](d, method, args.workers) for d in datasets) for t in tasks]
    if args.report:
        payload = json.dumps([r.to_dict() for r in reports], indent=2, ensure_ascii=False) + "\n"
        _write_atomic(Path(args.report), payload)
    if args.json:
        sys.stdout.write(json.dumps([r.to_dict() for r in reports], indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(format_table(reports))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=("grammar", "llm"), default="grammar",
                        help="how instructions are turned into canonical paths")
    common.add_argument("--theta", type=_theta, default=DEFAULT_THETA,
                        help=f"forward/turn angle threshold in radians (default pi/4 = {DEFAULT_THETA:.4f})")
    common.add_argument("--max-retries", type=_positive_int, default=3,
                        help="attempts allowed for the two extractors to agree")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--prompts", help="JSON file overriding the default prompts")
    common.add_argument("--capture-transcript", metavar="FILE", help="record LLM traffic to FILE")
    common.add_argument("--replay-transcript", metavar="FILE", help="answer LLM calls from FILE only")

    parser = argparse.ArgumentParser(prog="routemap", description="Build topological route maps from instructions and answer route queries.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="print canonical JSON for each instruction")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("build", parents=[common], help="build a map file from instructions")
    p.add_argument("file")
    p.add_argument("-o", "--output", help="map file to write (default: stdout)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", parents=[common], help="describe a route between two places")
    p.add_argument("map")
    p.add_argument("start")
    p.add_argument("goal")
    p.add_argument("--json", action="store_true", help="print the canonical path instead of text")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("gen-env", parents=[common], help="generate a seeded environment")
    p.add_argument("--nodes", type=_positive_int, default=12)
    p.add_argument("--designated", type=_positive_int, default=5)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_env)

    p = sub.add_parser("sample", parents=[common], help="sample a path dataset from an environment")
    p.add_argument("environment")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", parents=[common], help="run the reverse / combined evaluations")
    p.add_argument("--method", choices=("explicit", "implicit"), default="explicit")
    p.add_argument("--task", choices=("reverse", "combined", "both"), default="both")
    p.add_argument("--dataset", nargs="*", help="dataset files (default: generate seeded ones)")
    p.add_argument("--environments", type=_positive_int, default=10)
    p.add_argument("--nodes", type=_positive_int, default=12)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--json", action="store_true", help="print JSON reports instead of the table")
    p.add_argument("--report", metavar="FILE", help="also write JSON reports to FILE")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    with ExitStack() as stack:
        try:
            return args.func(args, _Session(args, stack))
        except CliError as exc:
            print(f"routemap: {exc}", file=sys.stderr)
            return exc.code


if __name__ == "__main__":
    sys.exit(main())
