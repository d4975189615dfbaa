#!/usr/bin/env python3
# Test model for the external protocol: y = x (+ theta with --add-theta).
import argparse
import json
import os
import random
import select
import signal
import sys
import time

ap = argparse.ArgumentParser()
ap.add_argument("--shuffle", action="store_true")
ap.add_argument("--duplicate", action="store_true")
ap.add_argument("--add-theta", action="store_true")
ap.add_argument("--die-after", type=int)
ap.add_argument("--exit-after", type=int)
ap.add_argument("--hang-after", type=int)
ap.add_argument("--garbage-at", type=int)
args = ap.parse_args()

out = sys.stdout
out.write(json.dumps({"ready": True}) + "\n")
out.flush()

rng = random.Random(7)
answered = 0
pending = []
buf = b""


def reply(req):
    global answered
    if args.die_after is not None and answered >= args.die_after:
        out.flush()
        os.kill(os.getpid(), signal.SIGKILL)
    if args.exit_after is not None and answered >= args.exit_after:
        out.flush()
        sys.exit(3)
    if args.hang_after is not None and answered >= args.hang_after:
        out.flush()
        time.sleep(3600)
    if args.garbage_at is not None and req["id"] == args.garbage_at:
        out.write("this is not json\n")
        out.flush()
        return
    y = list(req["x"])
    if args.add_theta and "theta" in req:
        y = [v + req["theta"] for v in y]
    line = json.dumps({"id": req["id"], "y": y}) + "\n"
    out.write(line)
    if args.duplicate:
        out.write(line)
    answered += 1


def flush():
    global pending
    if args.shuffle:
        rng.shuffle(pending)
    for req in pending:
        reply(req)
    pending = []
    out.flush()


def main():
    global buf
    fd = sys.stdin.fileno()
    while True:
        ready, _, _ = select.select([fd], [], [], 0.05)
        if not ready:
            flush()
            continue
        chunk = os.read(fd, 65536)
        if not chunk:
            flush()
            break
        buf += chunk
        while b"\n" in buf:
            line, buf = buf.split(b"\n", 1)
            if line.strip():
                pending.append(json.loads(line))


try:
    main()
except BrokenPipeError:
    os._exit(0)
