#!/usr/bin/env python3
"""Demo objective worker speaking the line protocol on stdin/stdout.

Each request line is a JSON object {id, params, start, end, interval,
checkpoint}; the reply carries one [budget, score] pair per interval step in
(start, end]. Curves are deterministic functions of the parameter values, so
a resumed request continues exactly the curve a fresh run would produce.
"""

import hashlib
import json
import math
import sys


def curve(params):
    blob = json.dumps(params, sort_keys=True).encode()
    digest = hashlib.sha256(blob).digest()
    asymptote = 0.5 + 0.5 * digest[0] / 255.0
    tau = 3.0 + 30.0 * digest[1] / 255.0
    return asymptote, tau


def main():
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = None
        try:
            request = json.loads(line)
            asymptote, tau = curve(request["params"])
            start, end, step = request["start"], request["end"], request["interval"]
            measurements = [
                [b, asymptote * (1.0 - math.exp(-b / tau))]
                for b in range(start + step, end + 1, step)
            ]
            response = {
                "id": request["id"],
                "measurements": measurements,
                "checkpoint": "b%d" % end,
            }
        except Exception as exc:  # malformed request: report it, keep serving
            rid = request.get("id", -1) if isinstance(request, dict) else -1
            response = {"id": rid, "error": str(exc)}
        sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
