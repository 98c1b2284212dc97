"""Reference generator server for the external protocol.

Answers as an oracle for the prompts of a gold corpus, over stdio or TCP:

    python -m coqe.decoding.server --corpus test.jsonl --scheme camera
    python -m coqe.decoding.server --corpus test.jsonl --tcp 5005

Requests are handled on a thread pool, so responses can return out of order.
Unknown prompts decode to the empty string.
"""
from __future__ import annotations

import argparse
import json
import socketserver
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from ..augment import render_corpus
from ..corpus import get_scheme, load_corpus
from ..template import style_for
from .core import EOS


def build_handler(targets: dict[str, str]) -> Callable[[dict], dict]:
    def handle(req: dict) -> dict:
        rid = req.get("id")
        gold = targets.get(req.get("input", ""), "")
        if "prefix" in req:
            script = gold.split()
            pos = len(req.get("prefix", []))
            nxt = script[pos] if pos < len(script) else EOS
            allowed = req.get("allowed", [])
            scores = dict.fromkeys(allowed, 0.0)
            if nxt in scores:
                scores[nxt] = 1.0
            return {"id": rid, "scores": scores}
        return {"id": rid, "output": gold}
    return handle


def serve_lines(rfile, wfile, handle: Callable[[dict], dict], workers: int = 4) -> None:
    lock = threading.Lock()

    def answer(line: bytes) -> None:
        try:
            resp = handle(json.loads(line))
        except (ValueError, TypeError):
            return
        data = (json.dumps(resp, ensure_ascii=False) + "\n").encode("utf-8")
        with lock:
            wfile.write(data)
            wfile.flush()

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for line in iter(rfile.readline, b""):
            if line.strip():
                pool.submit(answer, line)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", required=True)
    ap.add_argument("--scheme", default="camera")
    ap.add_argument("--style", default="prefix", choices=["prefix", "suffix"])
    ap.add_argument("--language", default="en", choices=["en", "vi"])
    ap.add_argument("--tcp", type=int, default=None, help="listen on this port instead of stdio")
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args(argv)

    with open(args.corpus, "rb") as fh:
        corpus = load_corpus(fh, get_scheme(args.scheme))
    targets = {ex.input: ex.target for ex in render_corpus(corpus, style=style_for(args.style, args.language))}
    handle = build_handler(targets)

    if args.tcp is None:
        serve_lines(sys.stdin.buffer, sys.stdout.buffer, handle, args.workers)
        return 0

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            serve_lines(self.rfile, self.wfile, handle, args.workers)

    with socketserver.ThreadingTCPServer(("127.0.0.1", args.tcp), Handler) as srv:
        srv.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
