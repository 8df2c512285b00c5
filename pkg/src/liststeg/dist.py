"""Next-token distributions on an exact integer grid, plus model sources.

Every probability the codec consumes lives on a 2^32 grid: a distribution
is a vector of non-negative integer weights summing to exactly 2^32, so
encoder and decoder agree bit-for-bit on every value regardless of platform
or float library.  Quantization from raw reals is done in exact rational
arithmetic with a deterministic largest-remainder rule.

Model sources span the entropy regimes the codec cares about:

  uniform              maximal entropy, stresses filtering throughput
  peaked               near-zero entropy, stresses expansion
  markov               sequence-level structure, exactly enumerable
  temperature-profile  entropy varies across steps
  server               external distribution server (newline-delimited JSON)
"""

from __future__ import annotations

import json
import math
import socket
import subprocess
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidDistributionError, ModelProtocolError, TransportError

GRID_BITS = 32
GRID = 1 << GRID_BITS


class QuantizedDistribution:
    """Integer-weight next-token distribution; weights sum to exactly 2^32."""

    __slots__ = ("weights", "vocab_size", "_alias_cache")

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights, dtype=np.uint64)
        if w.ndim != 1 or w.shape[0] < 2:
            raise InvalidDistributionError("need at least two tokens")
        if int(w.sum(dtype=object)) != GRID:
            raise InvalidDistributionError(
                f"weights sum to {int(w.sum(dtype=object))}, expected {GRID}"
            )
        w.flags.writeable = False
        self.weights = w
        self.vocab_size = int(w.shape[0])
        self._alias_cache = None

    def weight(self, token: int) -> int:
        return int(self.weights[token])

    def probability(self, token: int) -> Fraction:
        return Fraction(self.weight(token), GRID)

    def entropy_bits(self) -> float:
        p = self.weights[self.weights > 0].astype(np.float64) / GRID
        return float(-(p * np.log2(p)).sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuantizedDistribution):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())


def quantize(raw: Sequence) -> QuantizedDistribution:
    """Quantize a vector of non-negative reals onto the 2^32 grid.

    Each entry is floored at raw_i * 2^32 / sum(raw); the remaining grid
    units are then handed out one per token, zero-weight tokens with
    positive raw mass first, then by largest fractional remainder, ties
    broken by the smaller token id.  All arithmetic is exact (floats are
    treated as the rationals they are).
    """
    fracs = []
    for x in raw:
        f = Fraction(x)
        if f < 0:
            raise InvalidDistributionError("negative probability mass")
        fracs.append(f)
    if len(fracs) < 2:
        raise InvalidDistributionError("need at least two tokens")
    total = sum(fracs)
    if total == 0:
        raise InvalidDistributionError("all-zero probability vector")

    base = []
    rems = []
    for f in fracs:
        t = f * GRID / total
        q = t.numerator // t.denominator
        base.append(q)
        rems.append(t - q)
    deficit = GRID - sum(base)

    order = sorted(
        (i for i in range(len(fracs)) if fracs[i] > 0),
        key=lambda i: (0 if base[i] == 0 else 1, -rems[i], i),
    )
    for i in order[:deficit]:
        base[i] += 1
    return QuantizedDistribution(np.array(base, dtype=np.uint64))


class ModelSource:
    """Deterministic autoregressive distribution source.

    The next distribution is a pure function of the token history; encoder
    and decoder drive two instances through identical histories and must
    see bit-identical weights.
    """

    vocab_size: int

    def __init__(self, vocab_size: int):
        if vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        self.vocab_size = int(vocab_size)
        self.history: list[int] = []

    def next_distribution(self) -> QuantizedDistribution:
        raise NotImplementedError

    def append_history(self, token: int) -> "ModelSource":
        if not 0 <= token < self.vocab_size:
            raise ValueError(f"token {token} out of range for vocab {self.vocab_size}")
        self.history.append(int(token))
        return self

    def reset(self) -> "ModelSource":
        self.history.clear()
        return self

    def spawn(self) -> "ModelSource":
        """Fresh instance with empty history (decoder-side counterpart)."""
        raise NotImplementedError

    def close(self) -> None:
        pass


class UniformModel(ModelSource):
    def __init__(self, vocab_size: int):
        super().__init__(vocab_size)
        self._dist = quantize([1] * vocab_size)

    def next_distribution(self) -> QuantizedDistribution:
        return self._dist

    def spawn(self) -> "UniformModel":
        return UniformModel(self.vocab_size)


class PeakedModel(ModelSource):
    """One token holds mass 1 - eps; eps is spread uniformly over the rest."""

    def __init__(self, vocab_size: int, eps_log2: int = -10, peak_token: int = 0):
        super().__init__(vocab_size)
        if eps_log2 >= 0:
            raise ValueError("eps_log2 must be negative")
        if not 0 <= peak_token < vocab_size:
            raise ValueError("peak_token out of range")
        self.eps_log2 = int(eps_log2)
        self.peak_token = int(peak_token)
        eps = Fraction(1, 1 << -eps_log2)
        share = eps / (vocab_size - 1)
        raw = [share] * vocab_size
        raw[peak_token] = 1 - eps
        self._dist = quantize(raw)

    def next_distribution(self) -> QuantizedDistribution:
        return self._dist

    def spawn(self) -> "PeakedModel":
        return PeakedModel(self.vocab_size, self.eps_log2, self.peak_token)


class MarkovModel(ModelSource):
    """First-order chain: the distribution depends only on the last token."""

    def __init__(self, rows: Sequence[Sequence], initial: Sequence):
        vocab = len(rows)
        super().__init__(vocab)
        if any(len(r) != vocab for r in rows):
            raise ValueError("transition table must be square")
        if len(initial) != vocab:
            raise ValueError("initial weights must match vocab size")
        self.rows = [list(r) for r in rows]
        self.initial = list(initial)
        self._quantized_rows = [quantize(r) for r in rows]
        self._quantized_initial = quantize(initial)

    @classmethod
    def seeded(cls, vocab_size: int, seed: int) -> "MarkovModel":
        """Random integer transition table derived from a seed; the same
        (vocab_size, seed) pair builds the same chain on every platform."""
        rng = np.random.default_rng(seed)
        rows = (rng.integers(1, 100, size=(vocab_size, vocab_size))).tolist()
        initial = (rng.integers(1, 100, size=vocab_size)).tolist()
        return cls(rows, initial)

    def next_distribution(self) -> QuantizedDistribution:
        if not self.history:
            return self._quantized_initial
        return self._quantized_rows[self.history[-1]]

    def spawn(self) -> "MarkovModel":
        return MarkovModel(self.rows, self.initial)


class TemperatureProfileModel(ModelSource):
    """Geometric base shape reshaped by a cycling temperature schedule.

    Step t uses temperature temps[t mod len(temps)]; probabilities are
    proportional to ratio^(i / T).  Exercises entropy that varies by step.
    """

    def __init__(self, vocab_size: int, ratio: float = 0.7,
                 temperatures: Sequence[float] = (1.0,)):
        super().__init__(vocab_size)
        if not 0 < ratio < 1:
            raise ValueError("ratio must be in (0, 1)")
        if not temperatures or any(t <= 0 for t in temperatures):
            raise ValueError("temperatures must be positive")
        self.ratio = float(ratio)
        self.temperatures = [float(t) for t in temperatures]
        self._cache: dict[int, QuantizedDistribution] = {}

    def next_distribution(self) -> QuantizedDistribution:
        idx = len(self.history) % len(self.temperatures)
        dist = self._cache.get(idx)
        if dist is None:
            t = self.temperatures[idx]
            raw = [math.exp(math.log(self.ratio) * i / t) for i in range(self.vocab_size)]
            dist = quantize(raw)
            self._cache[idx] = dist
        return dist

    def spawn(self) -> "TemperatureProfileModel":
        return TemperatureProfileModel(self.vocab_size, self.ratio, self.temperatures)


class _Transport:
    def request(self, obj: dict) -> dict:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def _round_trip(self, send_line, recv_line, obj: dict) -> dict:
        try:
            send_line(json.dumps(obj, separators=(",", ":")) + "\n")
            line = recv_line()
        except (OSError, ValueError, BrokenPipeError) as e:
            raise TransportError(f"distribution server I/O failed: {e}") from e
        if not line:
            raise TransportError("distribution server closed the connection")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as e:
            raise ModelProtocolError(f"malformed server response: {e}") from e
        if not isinstance(resp, dict):
            raise ModelProtocolError("server response is not an object")
        if "error" in resp:
            err = resp["error"]
            raise ModelProtocolError(f"server error: {err}")
        return resp


class TcpTransport(_Transport):
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            raise TransportError(f"cannot connect to {host}:{port}: {e}") from e
        self._rfile = self._sock.makefile("r", encoding="utf-8")

    def request(self, obj: dict) -> dict:
        return self._round_trip(
            lambda s: self._sock.sendall(s.encode("utf-8")),
            self._rfile.readline,
            obj,
        )

    def close(self) -> None:
        try:
            self._rfile.close()
            self._sock.close()
        except OSError:
            pass


class StdioTransport(_Transport):
    """Spawns the server as a child process and speaks over its stdio pipe."""

    def __init__(self, command: Sequence[str]):
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise TransportError(f"cannot launch {command[0]!r}: {e}") from e

    def request(self, obj: dict) -> dict:
        if self._proc.poll() is not None:
            raise TransportError("distribution server process exited")

        def send(s: str):
            self._proc.stdin.write(s)
            self._proc.stdin.flush()

        return self._round_trip(send, self._proc.stdout.readline, obj)

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class ServerModel(ModelSource):
    """Client for an external distribution server.

    The server does the quantization; the wire carries only integer weights.
    The first response pins the model fingerprint, and any later change is
    treated as a protocol violation (the codec requires one fixed model).
    """

    def __init__(self, transport: _Transport, vocab_size: int,
                 session: str = "default", *,
                 _spawn_args: Optional[dict] = None):
        super().__init__(vocab_size)
        self._transport = transport
        self._session = session
        self._fingerprint: Optional[str] = None
        self._spawn_args = _spawn_args

    @classmethod
    def connect_tcp(cls, host: str, port: int, vocab_size: int,
                    session: str = "default") -> "ServerModel":
        args = {"mode": "tcp", "host": host, "port": port,
                "vocab_size": vocab_size, "session": session}
        return cls(TcpTransport(host, port), vocab_size, session, _spawn_args=args)

    @classmethod
    def spawn_stdio(cls, command: Sequence[str], vocab_size: int,
                    session: str = "default") -> "ServerModel":
        args = {"mode": "stdio", "command": list(command),
                "vocab_size": vocab_size, "session": session}
        return cls(StdioTransport(command), vocab_size, session, _spawn_args=args)

    @property
    def fingerprint(self) -> Optional[str]:
        return self._fingerprint

    def next_distribution(self) -> QuantizedDistribution:
        resp = self._transport.request({
            "session": self._session,
            "history": list(self.history),
            "vocab_size": self.vocab_size,
        })
        weights = resp.get("weights")
        if not isinstance(weights, list) or len(weights) != self.vocab_size:
            raise ModelProtocolError("server returned a malformed weight vector")
        if any((not isinstance(w, int)) or w < 0 for w in weights):
            raise ModelProtocolError("server weights must be non-negative integers")
        if sum(weights) != GRID:
            raise ModelProtocolError(
                f"server weights sum to {sum(weights)}, expected {GRID}"
            )
        fp = resp.get("fingerprint")
        if self._fingerprint is None:
            self._fingerprint = fp
        elif fp != self._fingerprint:
            raise ModelProtocolError("model fingerprint changed mid-session")
        return QuantizedDistribution(np.array(weights, dtype=np.uint64))

    def detokenize(self, tokens: Sequence[int]) -> str:
        resp = self._transport.request({"detokenize": list(tokens)})
        text = resp.get("text")
        if not isinstance(text, str):
            raise ModelProtocolError("detokenize response missing text")
        return text

    def tokenize(self, text: str) -> list[int]:
        resp = self._transport.request({"tokenize": text})
        tokens = resp.get("tokens")
        if not isinstance(tokens, list):
            raise ModelProtocolError("tokenize response missing tokens")
        return tokens

    def spawn(self) -> "ServerModel":
        if self._spawn_args is None:
            raise ValueError("this server model cannot be re-spawned")
        a = self._spawn_args
        if a["mode"] == "tcp":
            return ServerModel.connect_tcp(a["host"], a["port"], a["vocab_size"], a["session"])
        return ServerModel.spawn_stdio(a["command"], a["vocab_size"], a["session"])

    def close(self) -> None:
        self._transport.close()


def from_config(config: dict) -> ModelSource:
    """Build a model source from its JSON-style config dict (see README)."""
    kind = config.get("kind")
    if kind == "uniform":
        return UniformModel(config["vocab_size"])
    if kind == "peaked":
        return PeakedModel(
            config["vocab_size"],
            eps_log2=config.get("eps_log2", -10),
            peak_token=config.get("peak_token", 0),
        )
    if kind == "markov":
        if "rows" in config:
            return MarkovModel(config["rows"], config["initial"])
        return MarkovModel.seeded(config["vocab_size"], config.get("seed", 0))
    if kind == "temperature-profile":
        return TemperatureProfileModel(
            config["vocab_size"],
            ratio=config.get("ratio", 0.7),
            temperatures=config.get("temperatures", [1.0]),
        )
    if kind == "server":
        session = config.get("session", "default")
        if "command" in config:
            return ServerModel.spawn_stdio(config["command"], config["vocab_size"], session)
        endpoint = config.get("endpoint", "")
        if endpoint.startswith("tcp://"):
            host, _, port = endpoint[6:].partition(":")
            return ServerModel.connect_tcp(host, int(port), config["vocab_size"], session)
        raise ValueError(f"server config needs 'command' or tcp:// endpoint, got {config}")
    raise ValueError(f"unknown model kind: {kind!r}")


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
