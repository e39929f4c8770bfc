"""Wire-protocol client for the deployment environment service.

The agent talks to the environment exclusively through this newline-
delimited JSON interface, either over a spawned stdio service or a TCP
connection (see the environment package's docs/protocol.md).
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys

from .graphs import GraphObs, parse_observation


class ProtocolError(RuntimeError):
    """Error reply, malformed reply, or dropped connection."""


class EnvClient:
    def __init__(self, reader, writer, proc: subprocess.Popen | None = None, sock=None):
        self._reader = reader
        self._writer = writer
        self._proc = proc
        self._sock = sock

    @classmethod
    def spawn_stdio(cls, scenario_path: str, extra_args: tuple[str, ...] = ()) -> "EnvClient":
        """Launch the environment service as a child process over pipes."""
        proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "iabplan.cli",
                "serve-env",
                str(scenario_path),
                "--transport",
                "stdio",
                *extra_args,
            ],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )
        return cls(proc.stdout, proc.stdin, proc=proc)

    @classmethod
    def connect_tcp(cls, host: str, port: int, timeout: float = 10.0) -> "EnvClient":
        sock = socket.create_connection((host, port), timeout=timeout)
        stream = sock.makefile("rw", encoding="utf-8")
        return cls(stream, stream, sock=sock)

    def _roundtrip(self, message: dict) -> dict:
        self._writer.write(json.dumps(message) + "\n")
        self._writer.flush()
        line = self._reader.readline()
        if not line:
            raise ProtocolError("environment closed the connection")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable reply: {line!r}") from exc
        if "error" in reply:
            raise ProtocolError(f"environment error: {reply}")
        return reply

    def reset(self, seed: int = 0) -> GraphObs:
        reply = self._roundtrip({"cmd": "reset", "seed": seed})
        return parse_observation(reply["obs"])

    def step(self, action: int) -> tuple[GraphObs, float, bool, dict]:
        reply = self._roundtrip({"cmd": "step", "action": int(action)})
        return (
            parse_observation(reply["obs"]),
            float(reply["reward"]),
            bool(reply["done"]),
            reply["info"],
        )

    def close(self) -> None:
        try:
            self._roundtrip({"cmd": "close"})
        except ProtocolError:
            pass
        if self._proc is not None:
            self._proc.wait(timeout=10)
        if self._sock is not None:
            self._sock.close()

    def __enter__(self) -> "EnvClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
