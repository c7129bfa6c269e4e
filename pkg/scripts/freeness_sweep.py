"""Print rank, freeness and index of every character lattice S^w for g <= G."""
import argparse

from parahoric.char_lattices import character_lattice
from parahoric.sweep import positions_upto


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--g", type=int, default=2, help="largest genus (at most 3)")
    ap.add_argument("--p", type=int, nargs="+", default=[2, 3])
    args = ap.parse_args()
    print("p  g  D        w                      rank  free  index")
    for p in args.p:
        for g, t, w in positions_upto(args.g):
            C = character_lattice(w, p)
            print(f"{p:<2} {g:<2} {str(t.D):<8} {w.label():<22} {C.rank:<5} {str(C.is_free):<5} {C.index}")


if __name__ == "__main__":
    main()
