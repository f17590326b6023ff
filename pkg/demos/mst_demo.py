"""MST on a core-periphery network versus a lollipop, where the periphery is a long path."""
import sys

from cpnet.axioms import check_all
from cpnet.oracles import kruskal_mst
from cpnet.mst import AxiomCheckFailed, run_cp_mst
from cpnet.topology import gen_cp, gen_lollipop


def show(net, force=False):
    res = run_cp_mst(net, seed=1, force=force)
    st = res.stats
    ok = res.edges == kruskal_mst(net.n, net.weights)
    print(f"{net.name:>14}  phases {st.phases:3}  rounds {st.rounds:5}  "
          f"max edge load {st.max_edge_load:3}  matches kruskal {ok}")


def main(n=1024):
    show(gen_cp(n).with_random_weights(1))
    lolli = gen_lollipop(n).with_random_weights(1)
    print(f"{lolli.name:>14}  axiom failures {sorted(check_all(lolli).failures)}")
    try:
        show(lolli)
    except AxiomCheckFailed as e:
        print(f"{'':>14}  refused, {str(e).splitlines()[-1]}")
    show(lolli, force=True)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1024)
