import xml.dom.minidom

from ellq.svg import Plot


def test_log_plot_is_valid_and_skips_nonpositive():
    p = Plot("demo", "t", "err", logy=True)
    p.add("a", [0, 1, 2, 3], [1.0, 1e-3, 0.0, 1e-6])
    p.add("b", [0, 1], [float("nan"), 1.0])
    p.vline(1.5, "dashed", "worst case")
    p.vline(0.5, "dashdot", "crossing")
    p.hline(1e-3, "dotted", "eps")
    p.band([0, 3], [1e-5, 1e-5], [1e-4, 1e-4])
    doc = xml.dom.minidom.parseString(p.render())
    assert len(doc.getElementsByTagName("polyline")) == 2
    assert len(doc.getElementsByTagName("polygon")) == 1
    labels = [t.firstChild.data for t in doc.getElementsByTagName("text")]
    assert {"a", "b", "worst case", "crossing", "eps", "1e-6"} <= set(labels)


def test_render_is_deterministic():
    def build():
        p = Plot("x", "y", "z")
        p.add("s", [0, 1, 2], [3, 1, 2])
        return p.render()

    assert build() == build()


def test_empty_plot(tmp_path):
    path = Plot("empty", "x", "y", logx=True, logy=True).write(tmp_path / "e.svg")
    xml.dom.minidom.parse(str(path))


def test_escapes_text():
    doc = xml.dom.minidom.parseString(Plot("a < b & c", "x", "y").render())
    assert doc.getElementsByTagName("text")[0].firstChild.data == "a < b & c"
