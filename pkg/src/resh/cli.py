"""Command line entry points: check, run, trace, serve."""

from __future__ import annotations

import argparse
import queue
import socket
import sys
import threading
import time
from pathlib import Path
from typing import Dict, List, Optional

from .check import check
from .errors import ReshError
from .protocol import (
    Advertise, CancelTask, Envelope, Event, Pose, PoseUpdate, PropertyUpdate,
    Retract, SubmitProgram, TaskState, TaskStatus, decode, encode,
)
from .runtime import DEFAULT_STEP_MS, Runtime, build_runtime
from .sim import MockRobotConfig
from .syntax.parser import parse


def _read(path: str) -> str:
    return Path(path).read_text()


def cmd_check(args) -> int:
    try:
        check(parse(_read(args.file)))
    except ReshError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print("ok")
    return 0


def _build(args) -> Runtime:
    return build_runtime(
        _read(args.world),
        _read(args.pool) if args.pool else "",
        _read(args.inject) if args.inject else "",
        step_ms=args.step_ms,
    )


def cmd_run(args, letters_only: bool = False) -> int:
    try:
        rt = _build(args)
        pid = rt.submit(_read(args.file))
        rt.run_until_done(limit_ms=args.limit_ms)
    except ReshError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    text = rt.trace_text(pid)
    if letters_only:
        text = "".join(l + "\n" for l in text.splitlines()
                       if l.split("\t")[2] == "letter")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if rt.handle(pid).state == "succeeded" else 1


def cmd_trace(args) -> int:
    return cmd_run(args, letters_only=True)


# ---------------------------------------------------------------------------
# serve: newline-delimited protocol envelopes over TCP

class _Server:
    """One event loop thread; client requests are serialized into it."""

    def __init__(self, rt: Runtime, step_ms: int, realtime: bool,
                 trace_dir: str = ""):
        self.rt = rt
        self.step_ms = step_ms
        self.realtime = realtime
        self.trace_dir = trace_dir
        self.traced: set = set()
        self._reply_n = 0
        self.control: "queue.Queue[Envelope]" = queue.Queue()
        self.clients: List[socket.socket] = []
        self.lock = threading.Lock()
        self.stop = threading.Event()
        rt.sink = self.broadcast
        rt.world.sink = self.broadcast

    def broadcast(self, env: Envelope):
        data = encode(env)
        with self.lock:
            for c in list(self.clients):
                try:
                    c.sendall(data)
                except OSError:
                    self.clients.remove(c)

    def _reply(self, conn: socket.socket, body) -> None:
        now = self.rt.world.clock.now_ms
        env = Envelope(f"runtime-c{self._reply_n}", "runtime", now, body)
        self._reply_n += 1
        try:
            conn.sendall(encode(env))
        except OSError:
            pass

    def _snapshot(self, conn: socket.socket) -> None:
        """Bring a fresh connection up to date: current pool, poses,
        program states, and the trace records so far."""
        w = self.rt.world
        for name, r in w.robots.items():
            self._reply(conn, Advertise(
                name, tuple(r.capabilities),
                tuple(sorted(r.properties.items()))))
            self._reply(conn, PoseUpdate(name, r.pose, r.battery))
        for pid, run in self.rt.engine.runs.items():
            for rec in run.trace:
                self._reply(conn, Event("trace", (pid, rec.line())))
            self._reply(conn, TaskStatus(pid, run.task_state, run.detail))

    def _handle(self, env: Optional[Envelope], conn: socket.socket):
        if env is None:          # enqueued by the accept loop
            self._snapshot(conn)
            return
        body = env.body
        try:
            if isinstance(body, SubmitProgram):
                pid = self.rt.submit(body.source, body.program_id or None)
                self._reply(conn, TaskStatus(pid, TaskState.RUNNING))
            elif isinstance(body, TaskStatus):
                h = self.rt.handle(body.program_id)
                state = {"queued": TaskState.RUNNING,
                         "running": TaskState.RUNNING,
                         "succeeded": TaskState.SUCCEEDED,
                         "aborted": TaskState.FAILED,
                         "cancelled": TaskState.CANCELLED}[h.state]
                self._reply(conn, TaskStatus(h.program_id, state, h.detail))
            elif isinstance(body, CancelTask):
                self.rt.cancel(body.program_id)
            elif isinstance(body, Event):
                self.rt.world.fire_event(body.name, body.args)
            elif isinstance(body, PropertyUpdate):
                self.rt.world.set_property(body.robot, body.prop, body.value)
            elif isinstance(body, Advertise):
                self._edit_pool(body)
            elif isinstance(body, Retract):
                if body.action:
                    self.rt.world.retract_capability(body.robot, body.action)
                else:
                    self.rt.world.remove(body.robot)
        except ReshError as e:
            pid = getattr(body, "program_id", "") or ""
            self._reply(conn, TaskStatus(pid, TaskState.FAILED, str(e)))

    def loop(self):
        self.rt.tick()
        while not self.stop.is_set():
            t0 = time.monotonic()
            while True:
                try:
                    env, conn = self.control.get_nowait()
                except queue.Empty:
                    break
                self._handle(env, conn)
            self.rt.step(self.step_ms)
            self._dump_traces()
            if self.realtime:
                budget = self.step_ms / 1000.0 - (time.monotonic() - t0)
                if budget > 0:
                    time.sleep(budget)

    def _edit_pool(self, adv: Advertise):
        """Client-side pool editing: ADVERTISE spawns or updates a mock
        robot, RETRACT trims it; the world re-broadcasts the change."""
        w = self.rt.world
        if adv.robot in w.robots:
            w.update_offering(adv.robot, adv.capabilities, adv.properties)
            return
        m = w.map
        pose = Pose(0.0, 0.0, 0.0)
        for cy in range(m.height):
            for cx in range(m.width):
                if m.free((cx, cy)):
                    x, y = m.center((cx, cy))
                    pose = Pose(x, y, 0.0)
                    break
            else:
                continue
            break
        w.spawn(MockRobotConfig(
            name=adv.robot, capabilities=adv.capabilities,
            properties=adv.properties, pose=pose))

    def _dump_traces(self):
        if not self.trace_dir:
            return
        for pid in list(self.rt.engine.runs):
            h = self.rt.handle(pid)
            if h.state != "running" and pid not in self.traced:
                self.traced.add(pid)
                out = Path(self.trace_dir) / f"{pid}.trace"
                out.write_text(self.rt.trace_text(pid))

    def reader(self, conn: socket.socket):
        buf = b""
        with conn:
            while not self.stop.is_set():
                try:
                    chunk = conn.recv(65536)
                except OSError:
                    break
                if not chunk:
                    break
                buf += chunk
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    if not line.strip():
                        continue
                    try:
                        env = decode(line)
                    except ReshError:
                        continue
                    self.control.put((env, conn))
        with self.lock:
            if conn in self.clients:
                self.clients.remove(conn)


def cmd_serve(args) -> int:
    host, _, port = args.listen.rpartition(":")
    rt = _build(args)
    srv = _Server(rt, args.step_ms, realtime=not args.fast,
                  trace_dir=args.trace_dir)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host or "127.0.0.1", int(port)))
    sock.listen(16)
    print(f"listening on {sock.getsockname()[0]}:{sock.getsockname()[1]}",
          flush=True)
    threading.Thread(target=srv.loop, daemon=True).start()
    try:
        while True:
            conn, _ = sock.accept()
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with srv.lock:
                srv.clients.append(conn)
            srv.control.put((None, conn))   # snapshot from the loop thread
            threading.Thread(target=srv.reader, args=(conn,),
                             daemon=True).start()
    except KeyboardInterrupt:
        pass
    finally:
        srv.stop.set()
        sock.close()
    return 0


# ---------------------------------------------------------------------------

def main(argv: Optional[List[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="resh",
                                 description="orchestration runtime")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="compile a program")
    p.add_argument("file")

    def runnish(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("file")
        p.add_argument("--world", required=True)
        p.add_argument("--pool", default="")
        p.add_argument("--inject", default="")
        p.add_argument("--out", default="")
        p.add_argument("--step-ms", type=int, default=DEFAULT_STEP_MS)
        p.add_argument("--limit-ms", type=int, default=120_000)
        return p

    runnish("run", "run a program to completion, print full trace")
    runnish("trace", "run a program, print only its letters")

    p = sub.add_parser("serve", help="expose the protocol socket")
    p.add_argument("--listen", default="127.0.0.1:7471")
    p.add_argument("--world", required=True)
    p.add_argument("--pool", default="")
    p.add_argument("--inject", default="")
    p.add_argument("--step-ms", type=int, default=DEFAULT_STEP_MS)
    p.add_argument("--fast", action="store_true",
                   help="step as fast as possible (tests)")
    p.add_argument("--trace-dir", default="",
                   help="write <program>.trace files here on completion")

    args = ap.parse_args(argv)
    if args.cmd == "check":
        return cmd_check(args)
    if args.cmd == "run":
        return cmd_run(args)
    if args.cmd == "trace":
        return cmd_trace(args)
    return cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
