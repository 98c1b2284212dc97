"""Client for generators hosted outside the toolkit.

Wire format is newline-delimited JSON over a child process's stdin/stdout or a
TCP socket. Requests carry an ``id``; responses may come back in any order and
are routed to the waiting caller by that id.

Endpoints are either ``tcp://HOST:PORT`` or a shell-style command line that
starts a child process.
"""
from __future__ import annotations

import itertools
import json
import logging
import shlex
import socket
import subprocess
import threading
import time
from concurrent.futures import Future, TimeoutError as FutureTimeout
from typing import Mapping, Sequence

from .core import AllowedSet, GeneratorError, GeneratorTimeout, ProtocolViolation, check_scores

log = logging.getLogger(__name__)

MODES = ("step", "free")


class _Transport:
    def send(self, line: bytes) -> None:
        raise NotImplementedError

    def readline(self) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class _ProcessTransport(_Transport):
    def __init__(self, command: str):
        try:
            self.proc = subprocess.Popen(
                shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0)
        except OSError as exc:
            raise GeneratorError(f"cannot start generator process {command!r}: {exc}") from None

    def send(self, line: bytes) -> None:
        self.proc.stdin.write(line)
        self.proc.stdin.flush()

    def readline(self) -> bytes:
        return self.proc.stdout.readline()

    def close(self) -> None:
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
        self.proc.stdout.close()


class _SocketTransport(_Transport):
    def __init__(self, host: str, port: int, deadline: float):
        last_error = None
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise GeneratorTimeout(f"could not connect to {host}:{port}: {last_error}")
            try:
                self.sock = socket.create_connection((host, port), timeout=remaining)
                break
            except OSError as exc:
                last_error = exc
                time.sleep(min(0.05, max(remaining, 0)))
        self.sock.settimeout(None)
        self.rfile = self.sock.makefile("rb")

    def send(self, line: bytes) -> None:
        self.sock.sendall(line)

    def readline(self) -> bytes:
        return self.rfile.readline()

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.rfile.close()
        self.sock.close()


def _parse_endpoint(endpoint: str, timeout: float) -> _Transport:
    if endpoint.startswith("tcp://"):
        hostport = endpoint[len("tcp://"):]
        host, _, port = hostport.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp endpoint {endpoint!r}; expected tcp://HOST:PORT")
        return _SocketTransport(host, int(port), time.monotonic() + timeout)
    return _ProcessTransport(endpoint)


class ExternalGenerator:
    """Step or free generator speaking the line-delimited JSON protocol.

    Safe to call from several threads; each call blocks only on its own
    response.
    """

    def __init__(self, endpoint: str, mode: str = "step", timeout: float = 30.0):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.endpoint = endpoint
        self.mode = mode
        self.timeout = timeout
        self._ids = itertools.count()
        self._pending: dict[str, Future] = {}
        self._lock = threading.Lock()
        self._closed = False
        self._transport = _parse_endpoint(endpoint, timeout)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        while True:
            try:
                line = self._transport.readline()
            except (OSError, ValueError):
                line = b""
            if not line:
                self._fail_all(GeneratorError("generator connection closed"))
                return
            try:
                msg = json.loads(line)
                rid = str(msg["id"])
            except (ValueError, KeyError, TypeError):
                log.warning("malformed response line: %r", line[:200])
                self._fail_all(ProtocolViolation(f"malformed response line: {line[:80]!r}"))
                continue
            with self._lock:
                fut = self._pending.pop(rid, None)
            if fut is None:
                log.warning("response for unknown request id %s", rid)
                continue
            fut.set_result(msg)

    def _fail_all(self, exc: GeneratorError) -> None:
        with self._lock:
            pending, self._pending = self._pending, {}
        for rid, fut in pending.items():
            fut.set_exception(type(exc)(str(exc), request_id=rid))

    def _call(self, payload: dict) -> dict:
        rid = str(next(self._ids))
        payload = {"id": rid, **payload}
        fut: Future = Future()
        with self._lock:
            if self._closed:
                raise GeneratorError("generator is closed", request_id=rid)
            self._pending[rid] = fut
            try:
                self._transport.send((json.dumps(payload, ensure_ascii=False) + "\n").encode("utf-8"))
            except (OSError, ValueError) as exc:
                self._pending.pop(rid, None)
                raise GeneratorError(f"send failed: {exc}", request_id=rid) from None
        try:
            return fut.result(timeout=self.timeout)
        except FutureTimeout:
            with self._lock:
                self._pending.pop(rid, None)
            raise GeneratorTimeout(f"no response within {self.timeout}s", request_id=rid) from None

    def step(self, input_text: str, prefix: Sequence[str], allowed: AllowedSet) -> Mapping[str, float]:
        if self.mode != "step":
            raise GeneratorError("step() called on a free-mode generator")
        msg = self._call({"input": input_text, "prefix": list(prefix), "allowed": list(allowed.tokens)})
        scores = msg.get("scores")
        check_scores(scores, allowed, step=len(prefix), request_id=str(msg["id"]))
        return scores

    def generate(self, input_text: str) -> str:
        if self.mode != "free":
            raise GeneratorError("generate() called on a step-mode generator")
        msg = self._call({"input": input_text})
        out = msg.get("output")
        if not isinstance(out, str):
            raise ProtocolViolation("free response lacks a string 'output'", request_id=str(msg["id"]))
        return out

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
        self._transport.close()
        self._reader.join(timeout=2)

    def __enter__(self) -> "ExternalGenerator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def external_generator(endpoint: str, mode: str = "step", timeout: float = 30.0) -> ExternalGenerator:
    return ExternalGenerator(endpoint, mode, timeout)
