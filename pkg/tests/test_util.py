from urysohn_forge.util import default_workers, pmap


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("URYSOHN_FORGE_WORKERS", "5")
    assert default_workers() == 5
    monkeypatch.setenv("URYSOHN_FORGE_WORKERS", "junk")
    assert default_workers() == 1


def test_pmap_preserves_order():
    items = list(range(30))
    assert pmap(lambda x: x * x, items, workers=4) == [x * x for x in items]
    assert pmap(lambda x: x + 1, items, workers=1) == [x + 1 for x in items]
