#!/usr/bin/env python3
"""Writes the two-hand 3/4 piano fixtures used by the tests.

Both pieces are public domain (Petzold's Minuet in G, traditional
Greensleeves), transcribed by hand in simplified form. The SMF bytes are
assembled directly here so the fixtures do not depend on the project's
own MIDI writer.
"""
import struct
from pathlib import Path

TPB = 96
Q, E, H, DH, DQ = TPB, TPB // 2, 2 * TPB, 3 * TPB, 3 * TPB // 2

NAMES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}


def pitch(name):
    base = NAMES[name[0]]
    rest = name[1:]
    if rest.startswith("#"):
        base += 1
        rest = rest[1:]
    return 12 * (int(rest) + 1) + base


def vlq(n):
    out = [n & 0x7F]
    n >>= 7
    while n:
        out.append(0x80 | (n & 0x7F))
        n >>= 7
    return bytes(reversed(out))


def track_chunk(events, name, channel):
    """events: list of (tick, pitch, duration); notes in one voice may overlap chords."""
    timed = []
    for tick, p, dur in events:
        timed.append((tick, 1, 0x90 | channel, p, 80))
        timed.append((tick + dur, 0, 0x80 | channel, p, 64))
    timed.sort()
    body = bytearray()
    body += vlq(0) + b"\xff\x03" + vlq(len(name)) + name.encode()
    if channel == 0:
        body += vlq(0) + b"\xff\x51\x03" + (500000).to_bytes(3, "big")
        body += vlq(0) + b"\xff\x58\x04\x03\x02\x18\x08"
    now = 0
    for tick, _, status, p, vel in timed:
        body += vlq(tick - now) + bytes([status, p, vel])
        now = tick
    body += vlq(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def voice(bars):
    """bars: list of bars, each a list of (names, duration); names is a
    pitch name, a list of names for a chord, or None for a rest."""
    out, tick = [], 0
    for bar in bars:
        start = tick
        for names, dur in bar:
            if names is not None:
                for n in names if isinstance(names, list) else [names]:
                    out.append((tick, pitch(n), dur))
            tick += dur
        assert tick - start == DH, f"bar at {start} has {tick - start} ticks"
    return out


def smf(right, left):
    header = b"MThd" + struct.pack(">IHHH", 6, 1, 2, TPB)
    return header + track_chunk(right, "Right", 0) + track_chunk(left, "Left", 1)


MINUET_RH_A = [
    [("D5", Q), ("G4", E), ("A4", E), ("B4", E), ("C5", E)],
    [("D5", Q), ("G4", Q), ("G4", Q)],
    [("E5", Q), ("C5", E), ("D5", E), ("E5", E), ("F#5", E)],
    [("G5", Q), ("G4", Q), ("G4", Q)],
    [("C5", Q), ("D5", E), ("C5", E), ("B4", E), ("A4", E)],
    [("B4", Q), ("C5", E), ("B4", E), ("A4", E), ("G4", E)],
    [("F#4", Q), ("G4", E), ("A4", E), ("B4", E), ("G4", E)],
    [("A4", DH)],
]
MINUET_RH_B = MINUET_RH_A[:6] + [
    [("A4", Q), ("B4", E), ("A4", E), ("G4", E), ("F#4", E)],
    [("G4", DH)],
]
MINUET_LH_A = [
    [(["G3", "B3"], H), ("A3", Q)],
    [("B3", DH)],
    [("C4", DH)],
    [("B3", DH)],
    [("A3", DH)],
    [("G3", DH)],
    [("D4", Q), ("B3", Q), ("G3", Q)],
    [("D4", Q), ("D3", Q), ("C4", Q)],
]
MINUET_LH_B = MINUET_LH_A[:6] + [
    [("C4", Q), ("D4", Q), ("D3", Q)],
    [("G3", H), ("G2", Q)],
]

GREEN_RH = [
    [("C5", H), ("D5", Q)],
    [("E5", DQ), ("F5", E), ("E5", Q)],
    [("D5", H), ("B4", Q)],
    [("G4", DQ), ("A4", E), ("B4", Q)],
    [("C5", H), ("A4", Q)],
    [("A4", DQ), ("G#4", E), ("A4", Q)],
    [("B4", H), ("G#4", Q)],
    [("E4", H), ("A4", Q)],
    [("C5", H), ("D5", Q)],
    [("E5", DQ), ("F5", E), ("E5", Q)],
    [("D5", H), ("B4", Q)],
    [("G4", DQ), ("A4", E), ("B4", Q)],
    [("C5", DQ), ("B4", E), ("A4", Q)],
    [("G#4", DQ), ("F#4", E), ("G#4", Q)],
    [("A4", DH)],
    [(["A4", "C5", "E5"], DH)],
]
GREEN_ROOTS = ["A2", "C3", "G2", "E3", "A2", "F2", "E2", "E2",
               "A2", "C3", "G2", "E3", "A2", "E2", "A2", "A2"]
FIFTH = {"A2": "E3", "C3": "G3", "G2": "D3", "E3": "B3", "F2": "C3", "E2": "B2"}
GREEN_LH = [[(r, H), (FIFTH[r], Q)] for r in GREEN_ROOTS]


def main():
    here = Path(__file__).resolve().parent
    pieces = {
        "minuet_in_g.mid": (MINUET_RH_A + MINUET_RH_B, MINUET_LH_A + MINUET_LH_B),
        "greensleeves.mid": (GREEN_RH, GREEN_LH),
    }
    for name, (rh, lh) in pieces.items():
        (here / name).write_bytes(smf(voice(rh), voice(lh)))
        print(f"wrote {name}")


if __name__ == "__main__":
    main()
