"""
====================
The Response Grammar
====================

Policies reply in plain text. Drawing operations travel in a fenced
```draw block, one JSON object per line; a final answer is a line starting
with "ANSWER:". A reply may draw or answer, never both.
"""
from drawspace import (
    AmbiguousResponseError,
    extract_answer,
    parse_response,
    serialize_response,
)

drawing_reply = """\
The question asks about the mug, so I mark it first.
```draw
{"kind": "box", "k": 1, "p": [102, 44, 180, 121], "l": "blue mug"}
{"kind": "line", "k": 1, "p": [[141, 121], [141, 215]], "l": "drop line"}
```"""

resp = parse_response(drawing_reply)
print(f"thought: {resp.thought!r}")
for op in resp.ops:
    print(f"op: {op.kind} on image {op.k}, label {op.l!r}")

# Serialization is the exact inverse on canonical responses.
assert parse_response(serialize_response(resp)) == resp
print("parse(serialize(r)) == r holds")

answer_reply = "Tracing is done; the mug sits on the left shelf.\nANSWER: B"
final = parse_response(answer_reply)
print(f"final answer text: {final.final_answer!r}")

# Mixing operations and an answer in one reply is a grammar error.
try:
    parse_response(drawing_reply + "\nANSWER: B")
except AmbiguousResponseError as exc:
    print(f"mixed reply rejected: {exc}")

# Answer extraction is type-aware: option letter for choice questions,
# first finite number for numeric ones.
print("choice  :", extract_answer("I believe the answer is C.", "choice").value)
print("numeric :", extract_answer("roughly 3.4 meters, maybe 3.5", "numeric").value)
