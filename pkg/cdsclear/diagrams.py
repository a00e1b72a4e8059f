"""
DOT export of financial networks: banks are nodes labeled with their external assets, debts are solid
arcs, CDSs are bold arcs that name their reference bank and have a dashed connector from it.
"""
from typing import Sequence

from graphviz import Digraph

from cdsclear.gadgets import SOURCE, SINK
from cdsclear.network import FinancialNetwork


def _amount(value: float) -> str:
    return f"{value:.6g}"


class NetworkDigraph(Digraph):

    def bank(self, net: FinancialNetwork, bank: str):
        self.node(bank, label=f"{bank}\ne={_amount(net.external_of(bank))}")
        return self

    def debt(self, writer: str, holder: str, notional: float):
        self.edge(writer, holder, label=_amount(notional), style="solid")
        return self

    def cds(self, writer: str, holder: str, reference: str, notional: float, connector: bool = True):
        self.edge(writer, holder, label=f"{_amount(notional)} on {reference}", style="bold", color="blue",
                  reference=reference)
        if connector:
            self.edge(reference, holder, style="dashed", arrowhead="none", color="gray", constraint="false")
        return self


def export_dot(net: FinancialNetwork, hide_scaffolding: bool = False,
               scaffolding: Sequence[str] = (SOURCE, SINK), name: str = "network") -> str:
    """
    :param hide_scaffolding: leaves out contracts between scaffolding banks (source to sink)
    :return: the DOT source text
    """
    hidden = set(scaffolding) if hide_scaffolding else set()
    graph = NetworkDigraph(name=name, graph_attr={"rankdir": "LR"})
    for bank in net.banks:
        graph.bank(net, bank)
    for (writer, holder), notional in net.debts.items():
        if writer in hidden and holder in hidden:
            continue
        graph.debt(writer, holder, notional)
    for (writer, holder, reference), notional in net.cds.items():
        if writer in hidden and holder in hidden:
            continue
        graph.cds(writer, holder, reference, notional)
    return graph.source
