"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid scenario configuration.

    ``violations`` holds one ``(field, rule)`` pair per broken invariant so a
    caller can report everything at once instead of fixing one field at a time.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [("config", violations)]
        self.violations = list(violations)
        msg = "; ".join(f"{field}: {rule}" for field, rule in self.violations)
        super().__init__(msg)


class DomainError(ValueError):
    pass


class ContractViolation(RuntimeError):
    pass


class NoActiveUsers(LookupError):
    pass


class InfeasibleSearch(RuntimeError):
    def __init__(self, required, budget):
        self.required = required
        self.budget = budget
        super().__init__(f"exhaustive search needs {required} profiles, budget is {budget}")


class NoData(ValueError):
    pass
