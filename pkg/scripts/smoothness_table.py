"""Print the per-(cone, cell) smoothness table at g = 2, before and after refinement."""
import argparse

from parahoric.conical_complex import check_smooth_complex, induce_decomposition, refine_complex
from parahoric.polyhedral import principal_decomposition
from parahoric.symplectic_flags import ParahoricType


def show(rows) -> None:
    for r in rows:
        flag = "  <- finding" if r.finding else ""
        print(f"  {r.cell:<20} dim {r.dim} rays {list(map(list, r.rays))} "
              f"sym2={r.smooth_sym2} sw={r.smooth_sw} mult={r.multiplicity_sw}{flag}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=2)
    args = ap.parse_args()
    sigma = principal_decomposition(2)
    for D in [(1,), (2,), (1, 2)]:
        SF = induce_decomposition(sigma, 2, args.p, ParahoricType(2, D))
        print(f"D={D} principal")
        show(check_smooth_complex(SF))
        print(f"D={D} refined")
        show(check_smooth_complex(refine_complex(SF)))


if __name__ == "__main__":
    main()
