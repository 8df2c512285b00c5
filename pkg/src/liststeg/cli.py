"""Command-line driver: encode/decode files, self tests, capacity tables.

Exit codes: 0 success, 1 internal failure, 2 usage, 3 desync,
4 suffix-no-match, 5 ambiguous decode, 6 server transport/protocol,
7 token budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bitstream import BitString, SecretKey
from .codec import (
    CodecParams,
    decode,
    encode,
    encode_auto,
    read_stegotext,
    write_stegotext,
)
from .dist import from_config, load_config
from .errors import (
    AmbiguousDecodeError,
    DesyncError,
    ModelProtocolError,
    StegError,
    SuffixMatchError,
    TokenBudgetError,
    TransportError,
    TruncatedStegotextError,
)
from .metrics import build_report
from .selftest import run_selftest

KEY_ENV = "LISTSTEG_KEY"
META_FORMAT = "liststeg-meta-1"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DESYNC = 3
EXIT_NO_MATCH = 4
EXIT_AMBIGUOUS = 5
EXIT_TRANSPORT = 6
EXIT_TOKEN_BUDGET = 7


class UsageError(Exception):
    pass


def _load_key(args) -> SecretKey:
    text = args.key or os.environ.get(KEY_ENV)
    if not text:
        raise UsageError(
            f"no key: pass --key or set {KEY_ENV} (64 hex characters)"
        )
    try:
        return SecretKey.from_hex(text)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _model_hash(model_config: dict) -> str:
    canonical = json.dumps(model_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _read_payload(path: str, raw: bool) -> BitString:
    data = Path(path).read_bytes()
    if raw:
        return BitString.from_int(int.from_bytes(data, "big"), len(data) * 8)
    return BitString.unpack(data)


def _write_payload(path: str, payload: BitString, raw: bool) -> None:
    if raw:
        nbytes = (payload.length + 7) // 8
        pad = nbytes * 8 - payload.length
        Path(path).write_bytes((payload.to_int() << pad).to_bytes(nbytes, "big"))
    else:
        Path(path).write_bytes(payload.pack())


def _write_meta(path: Path, params: CodecParams, payload_bits: int,
                tokens: int, model_config: dict) -> None:
    lines = [
        f"format = {META_FORMAT}",
        f"list_cap_log2 = {params.list_cap_log2}",
        f"suffix_bits = {params.suffix_bits}",
        f"security_bits = {params.security_bits}",
        f"payload_bits = {payload_bits}",
        f"tokens = {tokens}",
        f"model_sha256 = {_model_hash(model_config)}",
        f"model_kind = {model_config.get('kind', '?')}",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_meta(path: Path) -> dict:
    meta = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, _, v = line.partition("=")
            meta[k.strip()] = v.strip()
    if meta.get("format") != META_FORMAT:
        raise UsageError(f"unrecognized meta format in {path}")
    return meta


def _codec_config(config: dict) -> tuple[int, int, object]:
    codec_cfg = config.get("codec", {})
    try:
        n_exp = int(codec_cfg["list_cap_log2"])
        security = int(codec_cfg.get("security_bits", 40))
        suffix = codec_cfg.get("suffix_bits", "auto")
    except KeyError as e:
        raise UsageError(f"config missing codec field: {e}") from e
    if suffix != "auto":
        suffix = int(suffix)
    return n_exp, security, suffix


def cmd_encode(args) -> int:
    key = _load_key(args)
    config = load_config(args.config)
    model_config = config.get("model")
    if not model_config:
        raise UsageError("config has no 'model' section")
    n_exp, security, suffix = _codec_config(config)
    max_tokens = args.max_tokens or config.get("max_tokens")
    payload = _read_payload(args.payload, args.raw)

    model = from_config(model_config)
    try:
        if suffix == "auto":
            params, trace = encode_auto(key, n_exp, security, model, payload,
                                        max_tokens=max_tokens)
        else:
            params = CodecParams(n_exp, suffix, security, key)
            trace = encode(params, model, payload, max_tokens=max_tokens)
    finally:
        model.close()

    out = Path(args.out)
    with out.open("wb") as f:
        write_stegotext(f, trace.tokens)
    _write_meta(out.with_name(out.name + ".meta"), params, payload.length,
                trace.n_all, model_config)
    report = build_report(trace, payload.length, params)
    print(report.to_text())
    if args.report_json:
        Path(args.report_json).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_decode(args) -> int:
    key = _load_key(args)
    config = load_config(args.config)
    model_config = config.get("model")
    if not model_config:
        raise UsageError("config has no 'model' section")
    n_exp, security, suffix = _codec_config(config)

    steg_path = Path(args.stegotext)
    meta_path = steg_path.with_name(steg_path.name + ".meta")
    payload_bits = args.payload_bits
    if meta_path.exists():
        meta = _read_meta(meta_path)
        if payload_bits is None:
            payload_bits = int(meta["payload_bits"])
        suffix = int(meta["suffix_bits"])
        n_exp = int(meta["list_cap_log2"])
        security = int(meta["security_bits"])
        if meta.get("model_sha256") != _model_hash(model_config):
            raise UsageError(
                "model config does not match the one recorded at encode time"
            )
    if payload_bits is None:
        raise UsageError("no meta file found: --payload-bits is required")
    if suffix == "auto":
        raise UsageError(
            "suffix_bits is 'auto' and no meta file records the actual value"
        )

    with steg_path.open("rb") as f:
        tokens = read_stegotext(f)
    params = CodecParams(n_exp, int(suffix), security, key)
    model = from_config(model_config)
    try:
        payload = decode(params, model, tokens, payload_bits)
    finally:
        model.close()
    _write_payload(args.out, payload, args.raw)
    print(f"recovered {payload.length} bits -> {args.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    failed = 0

    def report(result):
        nonlocal failed
        mark = "PASS" if result.passed else "FAIL"
        detail = f"  ({result.detail})" if result.detail else ""
        print(f"[{mark}] {result.name}{detail}")
        if not result.passed:
            failed += 1

    run_selftest(scale=args.scale, seed=args.seed, report=report)
    print(f"selftest {args.scale}: {'ok' if not failed else f'{failed} failures'}")
    return EXIT_OK if not failed else EXIT_FAILURE


def cmd_capacity(args) -> int:
    key = _load_key(args)
    config = load_config(args.config)
    model_config = config.get("model")
    if not model_config:
        raise UsageError("config has no 'model' section")
    _, security, _ = _codec_config(config)
    lengths = [int(x) for x in args.lengths.split(",") if x]
    list_exps = [int(x) for x in args.list_exps.split(",") if x] if args.list_exps \
        else [_codec_config(config)[0]]
    if not lengths:
        raise UsageError("--lengths must name at least one payload length")
    rng = np.random.default_rng(args.seed)

    rows = []
    base_model = from_config(model_config)
    try:
        for n_exp in list_exps:
            for nbits in lengths:
                value = 0
                for _ in range((nbits + 62) // 63):
                    value = (value << 63) | int(rng.integers(0, 1 << 63))
                payload = BitString.from_int(value & ((1 << nbits) - 1), nbits)
                params, trace = encode_auto(key, n_exp, security,
                                            base_model, payload,
                                            max_tokens=args.max_tokens)
                report = build_report(trace, nbits, params)
                rows.append({
                    "payload_bits": nbits,
                    "list_cap_log2": n_exp,
                    "suffix_bits": params.suffix_bits,
                    "tokens": trace.n_all,
                    "information_bits": round(report.total_information, 6),
                    "utilization": round(report.utilization, 6),
                    "utilization_lower_bound": round(report.utilization_lower_bound, 6),
                })
    finally:
        base_model.close()

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liststeg",
        description="Hide bitstreams inside model-sampled token sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="embed a payload file into a stegotext file")
    p.add_argument("--config", required=True, help="JSON session config")
    p.add_argument("--key", help=f"64 hex chars (or set {KEY_ENV})")
    p.add_argument("--payload", required=True, help="payload file")
    p.add_argument("--raw", action="store_true",
                   help="payload file is raw bytes, not the length-prefixed format")
    p.add_argument("--out", required=True, help="output stegotext (.lstg)")
    p.add_argument("--report-json", help="also write the capacity report as JSON")
    p.add_argument("--max-tokens", type=int, help="abort after this many tokens")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="recover the payload from a stegotext file")
    p.add_argument("--config", required=True)
    p.add_argument("--key", help=f"64 hex chars (or set {KEY_ENV})")
    p.add_argument("--stegotext", required=True)
    p.add_argument("--payload-bits", type=int,
                   help="payload length; defaults to the .meta file")
    p.add_argument("--raw", action="store_true",
                   help="write raw bytes instead of the length-prefixed format")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("selftest", help="run the statistical sanity suite")
    p.add_argument("--scale", choices=("quick", "full"), default="quick")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("capacity", help="tabulate utilization vs payload length and list cap")
    p.add_argument("--config", required=True)
    p.add_argument("--key", help=f"64 hex chars (or set {KEY_ENV})")
    p.add_argument("--lengths", required=True, help="comma-separated payload bit lengths")
    p.add_argument("--list-exps", help="comma-separated list-cap exponents")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_capacity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DesyncError, TruncatedStegotextError) as e:
        print(f"desync: {e}", file=sys.stderr)
        return EXIT_DESYNC
    except SuffixMatchError as e:
        print(f"suffix match failed: {e}", file=sys.stderr)
        return EXIT_NO_MATCH
    except AmbiguousDecodeError as e:
        print(f"ambiguous decode: {e}", file=sys.stderr)
        return EXIT_AMBIGUOUS
    except (TransportError, ModelProtocolError) as e:
        print(f"server error: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    except TokenBudgetError as e:
        print(
            f"token budget exhausted: {e} "
            f"(emitted {e.tokens_emitted} tokens, reached bit {e.bits_embedded})",
            file=sys.stderr,
        )
        return EXIT_TOKEN_BUDGET
    except StegError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
