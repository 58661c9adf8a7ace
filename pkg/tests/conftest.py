import pytest

from swarmsearch.querylog import parse_log_line

# 17-row fragment of an AOL-style log for the query 'ants': three users,
# five sessions under the 30-minute threshold.
ANTS_LOG_ROWS = [
    "285103\tants\t2006-04-01 19:45:23\t1\thttp://www.dna.affrc.go.jp",
    "285103\tants\t2006-04-01 19:45:23\t3\thttp://www.uky.edu",
    "285103\tants\t2006-04-01 19:50:59\t13\thttp://ohioline.osu.edu",
    "285103\tants\t2006-04-01 19:50:59\t14\thttp://ohioline.osu.edu",
    "285103\tants\t2006-04-11 21:44:45\t7\thttp://ohioline.osu.edu",
    "889138\tants\t2006-03-05 13:22:31\t4\thttp://www.ants.com",
    "889138\tants\t2006-03-05 13:22:31\t8\thttp://home.att.net",
    "889138\tants\t2006-03-05 13:26:14\t11\thttp://www.infowest.com",
    "889138\tants\t2006-03-05 13:26:14\t19\thttp://www.greensmiths.com",
    "3519380\tants\t2006-03-30 17:14:14\t0\t",
    "3519380\tants\t2006-03-30 17:15:53\t1\thttp://ant.edb.miyakyo-u.ac.jp",
    "3519380\tants\t2006-03-30 17:15:53\t3\thttp://www.uky.edu",
    "3519380\tants\t2006-03-30 17:15:53\t10\thttp://en.wikipedia.org",
    "3519380\tants\t2006-03-30 17:27:46\t0\t",
    "3519380\tants\t2006-04-01 13:55:03\t2\thttp://www.lingolex.com",
    "3519380\tants\t2006-04-01 13:55:03\t3\thttp://www.uky.edu",
    "3519380\tants\t2006-04-01 14:20:53\t0\t",
]


@pytest.fixture
def ants_log_text():
    return "\n".join(ANTS_LOG_ROWS) + "\n"


@pytest.fixture
def ants_interactions():
    return [parse_log_line(row, i) for i, row in enumerate(ANTS_LOG_ROWS, 1)]


@pytest.fixture
def ants_log_file(tmp_path, ants_log_text):
    path = tmp_path / "ants.tsv"
    path.write_text(ants_log_text, encoding="utf-8")
    return path
