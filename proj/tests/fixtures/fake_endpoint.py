#!/usr/bin/env python3
# pkrank/tests/fixtures/fake_endpoint.py

# Copyright 2026  The pkrank Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
# WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
# MERCHANTABLITY OR NON-INFRINGEMENT.
# See the Apache 2 License for the specific language governing permissions and
# limitations under the License.

# Scripted comparator endpoint for exercising the engine's side of the wire
# protocol.  Behaviour is chosen on the command line; see MODES.

import argparse
import csv
import json
import os
import sys
import time

MODES = ("const", "mos", "bad-score", "bad-id", "garbage", "error", "exit", "hang",
         "no-ready", "silent-exit")


def load_mos(path):
    table = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            table[(row["system_id"], row["utterance_id"])] = float(row["mos"])
    return table


def key_for(wav_path):
    system = os.path.basename(os.path.dirname(wav_path))
    utt = os.path.splitext(os.path.basename(wav_path))[0]
    return system, utt


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", choices=MODES, default="const")
    ap.add_argument("--score", type=float, default=0.73)
    ap.add_argument("--mos-csv")
    ap.add_argument("--after", type=int, default=0,
                    help="requests answered normally before misbehaving")
    ap.add_argument("--log")
    args = ap.parse_args()

    mos = load_mos(args.mos_csv) if args.mos_csv else {}
    log = open(args.log, "a") if args.log else None

    if args.mode == "silent-exit":
        sys.stderr.write("endpoint refuses to start\n")
        sys.exit(4)

    hello = json.loads(sys.stdin.readline())
    if hello.get("type") != "hello":
        sys.exit(1)
    if args.mode == "no-ready":
        send({"type": "howdy"})
    else:
        send({"type": "ready", "name": "fake-" + args.mode})

    served = 0
    for line in sys.stdin:
        msg = json.loads(line)
        if log:
            log.write(line)
            log.flush()
        if msg.get("type") == "bye":
            break
        if msg.get("type") != "compare":
            send({"type": "error", "message": "unexpected message"})
            continue
        for side in ("a", "b"):
            if not os.path.isfile(msg[side]):
                send({"type": "error", "id": msg["id"], "message": "missing " + msg[side]})
                break
        else:
            misbehave = served >= args.after
            served += 1
            reply = {"type": "result", "id": msg["id"], "score": args.score,
                     "mos_a": None, "mos_b": None}
            mode = args.mode if misbehave else "const"
            if args.mode == "mos":
                ma, mb = mos[key_for(msg["a"])], mos[key_for(msg["b"])]
                reply.update(score=1.0 if ma > mb else (0.0 if ma < mb else 0.5),
                             mos_a=ma, mos_b=mb)
            elif mode == "bad-score":
                reply["score"] = 1.7
            elif mode == "bad-id":
                reply["id"] = msg["id"] + 1
            elif mode == "garbage":
                sys.stdout.write("this is not json\n")
                sys.stdout.flush()
                continue
            elif mode == "error":
                reply = {"type": "error", "id": msg["id"], "message": "scripted failure"}
            elif mode == "exit":
                sys.stderr.write("endpoint crashed on request %d\n" % msg["id"])
                sys.stderr.flush()
                sys.exit(3)
            elif mode == "hang":
                time.sleep(3600)
            send(reply)
    if log:
        log.write("bye\n")
        log.close()


if __name__ == "__main__":
    main()
