"""Server-kind model source against the bundled bridge (requires node)."""

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from liststeg import (
    GRID,
    ModelProtocolError,
    ServerModel,
    TransportError,
    from_config,
)

FRONTEND = Path(__file__).parent.parent / "frontend"
SERVER_JS = FRONTEND / "dist" / "server.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not SERVER_JS.exists(),
    reason="bridge not built (run tsc in frontend/ first)",
)


def server_vocab() -> int:
    out = subprocess.run(["node", str(SERVER_JS), "--info"],
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)["vocab_size"]


def stdio_model(vocab=None) -> ServerModel:
    return ServerModel.spawn_stdio(["node", str(SERVER_JS), "--stdio"],
                                   vocab_size=vocab or server_vocab())


class TestStdioTransport:
    def test_weights_are_grid_exact(self):
        model = stdio_model()
        try:
            d = model.next_distribution()
            assert int(d.weights.sum(dtype=object)) == GRID
            assert d.vocab_size == model.vocab_size
        finally:
            model.close()

    def test_repeated_calls_identical(self):
        model = stdio_model()
        try:
            model.append_history(1)
            first = model.next_distribution()
            for _ in range(20):
                assert np.array_equal(model.next_distribution().weights, first.weights)
        finally:
            model.close()

    def test_vocab_mismatch_is_protocol_error(self):
        model = stdio_model(vocab=7)
        try:
            with pytest.raises(ModelProtocolError):
                model.next_distribution()
        finally:
            model.close()

    def test_tokenize_detokenize_round_trip(self):
        model = stdio_model()
        try:
            tokens = model.tokenize("down the rabbit-hole")
            assert model.detokenize(tokens) == "down the rabbit-hole"
        finally:
            model.close()

    def test_dead_server_is_transport_error(self):
        model = stdio_model()
        model.close()
        with pytest.raises(TransportError):
            model.next_distribution()

    def test_from_config_command_form(self):
        cfg = {"kind": "server",
               "command": ["node", str(SERVER_JS), "--stdio"],
               "vocab_size": server_vocab()}
        model = from_config(cfg)
        try:
            assert int(model.next_distribution().weights.sum(dtype=object)) == GRID
        finally:
            model.close()


class TestTcpTransport:
    @pytest.fixture()
    def tcp_server(self):
        port = 39473
        proc = subprocess.Popen(["node", str(SERVER_JS), "--port", str(port)],
                                stdout=subprocess.PIPE, text=True)
        assert proc.stdout.readline()  # wait for the listening banner
        yield "127.0.0.1", port
        proc.terminate()
        proc.wait(timeout=10)

    def test_connect_and_query(self, tcp_server):
        host, port = tcp_server
        model = ServerModel.connect_tcp(host, port, server_vocab())
        try:
            model.append_history(2)
            d = model.next_distribution()
            assert int(d.weights.sum(dtype=object)) == GRID
            assert model.fingerprint
        finally:
            model.close()

    def test_refused_connection_is_transport_error(self):
        with pytest.raises(TransportError):
            ServerModel.connect_tcp("127.0.0.1", 39999, 52)
