import sys
from pathlib import Path

import pytest

from sponsorscope.core import CommentRef, Post, Profile, Story
from sponsorscope.ingest import Dataset

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def tiny_dataset():
    profiles = [
        Profile("alice", 2_000_000, 300, 900, True, "travel | food", "https://alice.example.com"),
        Profile("bob", 50_000, 800, 400, False, "fitness coach"),
        Profile("carol", 3_000, 200, 50),
    ]
    posts = [
        Post("p1", "alice", 1000, "New serum from @glowlab #ad #skincare", 500,
             comments=(CommentRef("x", 1060), CommentRef("y", 1600), CommentRef("x", 4000))),
        Post("p2", "alice", 2000, "Sunset walk #travel", 900, comments=(CommentRef("y", 2120),)),
        Post("p3", "bob", 3000, "Leg day #fitness #Sponsored", 120, comments=(CommentRef("z", 3300),)),
        Post("p4", "carol", 4000, "coffee time", 30),
    ]
    stories = [
        Story("s1", "alice", 5000, True, "Health/Beauty"),
        Story("s2", "alice", 6000, False),
        Story("s3", "bob", 7000, True),
    ]
    return Dataset(profiles, posts, stories)


# acceptance reporting ---------------------------------------------------------

def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if rep.passed else "FAIL"
    item.config._acceptance[number] = f"[{status}] criterion {number:>2}: {title}" + (f" | {detail}" if detail else "")


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
