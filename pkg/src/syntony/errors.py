"""Exception hierarchy shared across the simulator."""


class SyntonyError(Exception):
    pass


class ConfigError(SyntonyError):
    """Invalid topology, parameters, or experiment configuration."""


class PhaseQueryError(SyntonyError):
    """Phase history queried outside its covered range."""


class SimulationFault(SyntonyError):
    """A run aborted: buffer overflow/underflow, divergence, or accounting error."""

    def __init__(self, kind: str, message: str, *, t: float | None = None,
                 node: int | None = None, link: tuple[int, int] | None = None):
        self.kind = kind
        self.t = t
        self.node = node
        self.link = link
        where = []
        if t is not None:
            where.append(f"t={t:.9g}s")
        if node is not None:
            where.append(f"node={node}")
        if link is not None:
            where.append(f"link={link[0]}->{link[1]}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{kind}: {message}{suffix}")


class AccountingFault(SimulationFault):
    """Counter bookkeeping violated a precondition (e.g. sampled too rarely)."""
