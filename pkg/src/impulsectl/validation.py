from dataclasses import dataclass, field


@dataclass
class ValidationReport:
    """Outcome of checking a model component against its assumptions.

    ``checks`` maps a check name to pass/fail, ``failures`` lists human-readable
    violations, and ``notes`` carries extra findings (for instance the tightest
    admissible cost bound, or checks that cannot be decided by sampling).
    """

    subject: str
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def record(self, name, ok, failures=()):
        self.checks[name] = self.checks.get(name, True) and bool(ok)
        self.failures.extend(failures)

    def to_dict(self):
        return {
            "subject": self.subject,
            "passed": self.passed,
            "checks": dict(self.checks),
            "failures": list(self.failures),
            "notes": dict(self.notes),
        }
