from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

ACCEPTANCE_LINES = []


def _criterion_number(line):
    token = line.split("criterion ", 1)[1].split()[0]
    return int(token) if token.isdigit() else 99


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_number):
            terminalreporter.write_line(line)
