"""Write a seeded synthetic corpus: annotations.json plus raw detections/<rally_id>.jsonl."""

import argparse

from rallyseq.synth import write_corpus_with_detections


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", help="output directory")
    ap.add_argument("--rallies", type=int, default=20)
    ap.add_argument("--max-events", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rallies = write_corpus_with_detections(args.out, args.seed, args.rallies, args.max_events)
    print(f"wrote {len(rallies)} rallies to {args.out}")


if __name__ == "__main__":
    main()
