#!/usr/bin/env python3
"""Canned protocol responder for subprocess-client tests.

Always answers about a 4x4 image with one full-image mask; argv[1] selects a
fault mode (error, garbage, outoforder, exit).
"""

import json
import sys

FULL = {"size": [4, 4], "counts": [0, 16], "confidence": 1.0}


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "ok"
    if mode == "exit":
        return
    for line in sys.stdin:
        request = json.loads(line)
        request_id = request.get("id", -1)
        if mode == "garbage":
            print("this is not json")
        elif mode == "error":
            print(json.dumps({"id": request_id, "ok": False, "error": "boom"}))
        else:
            if mode == "outoforder":
                print(json.dumps({"id": 999999, "ok": True, "masks": []}))
            if request["op"] == "prepare":
                print(json.dumps({"id": request_id, "ok": True}))
            else:
                print(json.dumps({"id": request_id, "ok": True, "masks": [FULL]}))
        sys.stdout.flush()


if __name__ == "__main__":
    main()
