#!/usr/bin/env python3
"""Minimal bridge worker: a linear regression model served over stdin/stdout.

    preddiff relevance --data data.csv --model "bridge:python3 demo/linear_worker.py 2,3,-1"
"""
import json
import sys


def main():
    coefs = [float(v) for v in (sys.argv[1] if len(sys.argv) > 1 else "1").split(",")]
    hello = {"preddiff_bridge": 1, "task": "regression",
             "n_features": len(coefs), "n_outputs": 1}
    print(json.dumps(hello), flush=True)
    for line in sys.stdin:
        request = json.loads(line)
        try:
            outputs = [[sum(c * x for c, x in zip(coefs, row))] for row in request["inputs"]]
            reply = {"id": request["id"], "outputs": outputs}
        except Exception as exc:  # reported to the caller as a model error
            reply = {"id": request["id"], "error": repr(exc)}
        print(json.dumps(reply), flush=True)


if __name__ == "__main__":
    main()
