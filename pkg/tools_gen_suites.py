"""One-shot generator for the builtin suite manifests and comparison fixtures."""
import json
from pathlib import Path

IMB_BINARY = [
    ("sick", 3541, 231, 30, 3772),
    ("scene", 1976, 431, 300, 2407),
    ("analcatdata_lawsuit", 245, 19, 5, 264),
    ("meta", 474, 54, 22, 528),
    ("analcatdata_apnea3", 395, 55, 4, 450),
    ("analcatdata_apnea2", 411, 64, 4, 475),
    ("visualizing_livestock", 105, 25, 3, 130),
    ("arsenic-female-bladder", 479, 80, 5, 559),
    ("spectrometer", 476, 55, 102, 531),
    ("segment", 1980, 330, 20, 2310),
    ("analcatdata_halloffame", 1215, 125, 17, 1340),
    ("analcatdata_birthday", 312, 53, 4, 365),
    ("JapaneseVowels", 8347, 1614, 15, 9961),
    ("mfeat-factors", 1800, 200, 217, 2000),
    ("mfeat-zernike", 1800, 200, 48, 2000),
    ("hypothyroid", 3481, 291, 30, 3772),
    ("ipums_la_98-small", 6694, 791, 56, 7485),
    ("synthetic_control", 500, 100, 61, 600),
    ("confidence", 60, 12, 4, 72),
    ("ipums_la_99-small", 8276, 568, 57, 8844),
    ("mfeat-karhunen", 1800, 200, 65, 2000),
    ("page-blocks", 4913, 560, 11, 5473),
    ("mfeat-pixel", 1800, 200, 241, 2000),
    ("sylva_prior", 13509, 886, 109, 14395),
    ("pc4", 1280, 178, 38, 1458),
    ("pc3", 1403, 160, 38, 1563),
    ("jm1", 8779, 2106, 22, 10885),
    ("ar4", 87, 20, 30, 107),
    ("ar6", 86, 15, 30, 101),
    ("kc3", 415, 43, 40, 458),
    ("Stagger1", 888391, 111609, 4, 1000000),
    ("PizzaCutter1", 609, 52, 38, 661),
]

EXT_BINARY = [
    ("mammography", 10923, 260, 7, 11183),
    ("oil_spill", 896, 41, 50, 937),
    ("yeast_ml8", 2383, 34, 117, 2417),
    ("arsenic-male-bladder", 535, 24, 5, 559),
    ("mc1", 9398, 68, 39, 9466),
    ("pc2", 5566, 23, 37, 5589),
    ("PieChart2", 729, 16, 37, 745),
    ("creditcard", 284315, 492, 31, 284807),
    ("dis", 3714, 58, 30, 3772),
    ("Speech", 3625, 61, 401, 3686),
    ("APSFailure", 74625, 1375, 171, 76000),
]

IMB_MULTI = [
    ("glass", 76, 9, 10, 214),
    ("meta_batchincremental.arff", 50, 3, 63, 74),
    ("meta_instanceincremental.arff", 54, 3, 63, 74),
    ("flags", 60, 4, 29, 194),
    ("bridges", 44, 10, 12, 105),
    ("squash-unstored", 24, 4, 24, 52),
    ("ipums_la_97-small", 1938, 258, 61, 7019),
    ("analcatdata_broadwaymult", 118, 21, 8, 285),
    ("prnn_viruses", 39, 3, 19, 61),
    ("prnn_fglass", 76, 9, 10, 214),
    ("cardiotocography", 579, 53, 36, 2126),
    ("wall-robot-navigation", 2205, 328, 25, 5456),
    ("micro-mass", 60, 11, 1301, 571),
    ("robot-failures-lp3", 20, 3, 91, 47),
    ("autoUniv-au4-2500", 1173, 196, 101, 2500),
    ("autoUniv-au7-500", 192, 43, 13, 500),
    ("heart-h", 188, 15, 14, 294),
    ("nursery", 4320, 328, 9, 12958),
    ("connect-4", 44473, 6449, 43, 67557),
    ("ecoli", 143, 20, 8, 327),
    ("thyroid-new", 150, 30, 6, 215),
    ("collins", 80, 6, 24, 1000),
    ("jungle_chess_2pcs_endgame_panther_lion", 2523, 145, 47, 4704),
    ("jungle_chess_2pcs_endgame_panther_elephant", 2495, 195, 47, 4704),
    ("jungle_chess_2pcs_endgame_complete", 23062, 4335, 47, 44819),
    ("jungle_chess_2pcs_endgame_rat_lion", 3078, 380, 47, 5880),
    ("volkert", 12806, 1361, 181, 58310),
    ("microaggregation2", 11162, 743, 21, 20000),
]

EXT_MULTI = [
    ("anneal", 684, 8, 39, 898),
    ("lymph", 81, 2, 19, 148),
    ("page-blocks", 4913, 28, 11, 5473),
    ("covertype", 283301, 2747, 55, 581012),
    ("yeast", 463, 5, 9, 1484),
    ("kropt", 4553, 27, 7, 28056),
    ("baseball", 1215, 57, 17, 1340),
    ("meta_stream_intervals.arff", 23021, 73, 75, 45164),
    ("analcatdata_halloffame", 1215, 57, 17, 1340),
    ("kr-vs-k", 4553, 27, 7, 28056),
    ("ldpa", 54480, 1381, 8, 164860),
    ("walking-activity", 21991, 911, 5, 149332),
    ("thyroid-allhyper", 1632, 31, 27, 2800),
    ("thyroid-dis", 1632, 31, 27, 2800),
    ("thyroid-ann", 3488, 93, 22, 3772),
    ("shuttle", 45586, 10, 10, 58000),
    ("wine-quality-red", 681, 10, 12, 1599),
    ("allbp", 3609, 14, 30, 3772),
    ("allrep", 3648, 34, 30, 3772),
    ("jannis", 38522, 1687, 55, 83733),
    ("helena", 4005, 111, 28, 65196),
    ("Indian_pines", 4050, 20, 221, 9144),
]

SUITES = {
    "imbalanced_binary": ("imbalanced", "binary", IMB_BINARY, 32),
    "extremely_imbalanced_binary": ("extremely_imbalanced", "binary", EXT_BINARY, 11),
    "imbalanced_multiclass": ("imbalanced", "multiclass", IMB_MULTI, 28),
    "extremely_imbalanced_multiclass": ("extremely_imbalanced", "multiclass", EXT_MULTI, 22),
}

COMP_BINARY = [
    ("PizzaCutter1", 0.727753, 0.570387), ("Stagger1", 1.000000, 1.000000),
    ("kc3", 0.781469, 0.545455), ("confidence", 0.600000, 0.833333),
    ("sylva_prior", 0.993930, 0.984562), ("pc4", 0.855035, 0.692361),
    ("ipums_la_99-small", 0.817722, 0.526236), ("mfeat-karhunen", 0.998889, 0.990000),
    ("jm1", 0.678592, 0.564777), ("pc3", 0.797115, 0.536075),
    ("page-blocks", 0.947018, 0.944711), ("mfeat-pixel", 0.990000, 0.996667),
    ("ar6", 0.352273, 0.500000), ("synthetic_control", 1.000000, 1.000000),
    ("ar4", 0.677273, 0.854545), ("mfeat-zernike", 0.997778, 0.997778),
    ("hypothyroid", 0.991427, 0.993151), ("JapaneseVowels", 0.978240, 0.988422),
    ("mfeat-factors", 1.000000, 0.987778), ("ipums_la_98-small", 0.807348, 0.544993),
    ("analcatdata_birthday", 0.879260, 0.769718),
    ("analcatdata_halloffame", 0.911503, 0.799873),
    ("segment", 0.987952, 0.998990), ("spectrometer", 0.970588, 0.911765),
    ("arsenic-female-bladder", 0.783333, 0.633333), ("sick", 0.968634, 0.927080),
    ("analcatdata_lawsuit", 1.000000, 1.000000),
    ("visualizing_livestock", 0.740741, 0.481481),
    ("analcatdata_apnea2", 0.908374, 0.906250),
    ("analcatdata_apnea3", 0.928932, 0.908369),
    ("meta", 0.791162, 0.491597), ("scene", 0.973815, 0.967593),
]

COMP_EXT_BINARY = [
    ("arsenic-male-bladder", 0.671642, 0.833333), ("PieChart2", 0.833333, 0.497268),
    ("oil_spill", 0.714444, 0.595556), ("mc1", 0.803154, 0.646633),
    ("Speech", 0.633039, 0.533333), ("pc2", 0.880388, 0.500000),
    ("APSFailure", 0.963059, 0.889026), ("dis", 0.962823, 0.599461),
    ("creditcard", 0.926413, 0.865741), ("mammography", 0.893967, 0.805861),
    ("yeast_ml8", 0.869780, 0.500000),
]

COMP_EXT_MULTI = [
    ("thyroid-dis", 0.579901, 0.426047), ("shuttle", 0.952368, 0.856955),
    ("walking-activity", 0.607113, 0.628591), ("thyroid-ann", 0.996942, 0.984360),
    ("anneal", 0.976608, 1.000000), ("lymph", 0.679167, 0.895833),
    ("helena", 0.238234, 0.214591), ("jannis", 0.607618, 0.565518),
    ("Indian_pines", 0.873247, 0.936270), ("baseball", 0.722551, 0.560648),
    ("yeast", 0.507521, 0.401817), ("page-blocks", 0.914376, 0.840056),
    ("allbp", 0.861094, 0.630666), ("covertype", 0.873699, 0.243437),
    ("analcatdata_halloffame", 0.734668, 0.560648), ("ldpa", 0.870157, 0.697121),
    ("wine-quality-red", 0.492832, 0.310061),
    ("meta_stream_intervals.arff", 0.954184, 0.972484),
    ("thyroid-allhyper", 0.596032, 0.426047), ("kr-vs-k", 0.766596, 0.857321),
    ("allrep", 0.840278, 0.700581), ("kropt", 0.749832, 0.900749),
]


def main():
    root = Path(__file__).parent
    suites_dir = root / "src/imbaml/suites"
    suites_dir.mkdir(parents=True, exist_ok=True)
    for name, (regime, task, rows, expected_count) in SUITES.items():
        assert len(rows) == expected_count, (name, len(rows))
        assert len({r[0] for r in rows}) == expected_count, f"dupe name in {name}"
        for r in rows:
            ratio = r[1] / r[2]
            if regime == "imbalanced":
                assert 3.0 <= ratio < 20.0, (name, r, ratio)
            else:
                assert ratio >= 20.0, (name, r, ratio)
            assert r[2] >= 2, (name, r)
            if task == "binary":
                assert r[1] + r[2] == r[4], (name, r)
            else:
                assert r[1] + r[2] < r[4], (name, r)
        doc = {"suite": name, "entries": [
            {"name": n, "expected_regime": regime, "task": task, "source": None,
             "majority_size": maj, "minority_size": mino,
             "n_features": nf, "n_instances": ni}
            for n, maj, mino, nf, ni in rows]}
        (suites_dir / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")

    fixtures = root / "tests/fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    for fname, rows, expect in [
        ("comparison_binary.json", COMP_BINARY, (16, 11, 5)),
        ("comparison_extreme_binary.json", COMP_EXT_BINARY, (10, 0, 1)),
        ("comparison_extreme_multiclass.json", COMP_EXT_MULTI, (15, 0, 7)),
    ]:
        w = sum(1 for _, a, b in rows if a - b > 0.01)
        l = sum(1 for _, a, b in rows if b - a > 0.01)
        d = len(rows) - w - l
        assert (w, d, l) == expect, (fname, w, d, l)
        doc = {"a": {n: a for n, a, _ in rows}, "b": {n: b for n, _, b in rows}}
        (fixtures / fname).write_text(json.dumps(doc, indent=1) + "\n")
    print("suites + fixtures written, all sanity checks passed")


if __name__ == "__main__":
    main()
