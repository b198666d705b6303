"""Independent reference computation for the golden end-to-end fixture.

Reads the fixture directory (model.cfg, panel.csv, scores.csv, events.csv),
recomputes the whole two-cluster pipeline with numpy/scipy using brute-force
routes (explicit block-diagonal GLS weights, LSDV instead of the within
transform, explicit random-effects covariance, dense Kronecker-style PCSE
sandwich), and writes:

  oracle_values.json   numbers the Rust pipeline must match
  expected_report.txt  the text report, rendered from the oracle numbers

Usage: python oracle.py <fixture-dir>
"""

import csv
import json
import sys
from pathlib import Path

import numpy as np
from scipy import stats

RULE = "-" * 96
DOUBLE_RULE = "=" * 96


# ---------------------------------------------------------------- inputs


def read_config(path):
    cfg = {"regressor": []}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "regressor":
            cfg["regressor"].append(value)
        else:
            cfg[key] = value
    return cfg


def parse_regressor(expr):
    if expr.endswith(")"):
        name, lag = expr[:-1].split("(-")
        return name, int(lag)
    return expr, 0


def read_panel(path):
    with open(path, newline="") as fh:
        rdr = csv.reader(fh)
        header = next(rdr)
        variables = header[2:]
        cells = {}
        entities = []
        years = set()
        for row in rdr:
            c, y = row[0], int(row[1])
            if c not in entities:
                entities.append(c)
            years.add(y)
            for v, s in zip(variables, row[2:]):
                if s != "":
                    cells[(c, y, v)] = float(s)
    return entities, sorted(years), variables, cells


def read_scores(path, indicator):
    out = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            if r["indicator"] == indicator:
                out[r["country"]] = float(r["score"])
    return out


def read_events(path, horizon):
    spans = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            end = horizon if r["end_year"] == "ongoing" else int(r["end_year"])
            spans.setdefault(r["country"], []).append((int(r["start_year"]), end))
    return spans


# ---------------------------------------------------------------- helpers


def ols_stats(y, X, e, has_intercept):
    n, k = X.shape
    ssr = float(e @ e)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ssr / tss
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
    se = np.sqrt(ssr / (n - k))
    if has_intercept:
        f = (r2 / (k - 1)) / ((1.0 - r2) / (n - k))
        pf = float(stats.f.sf(f, k - 1, n - k))
    else:
        f = None
        pf = None
    dw = float((np.diff(e) ** 2).sum() / ssr)
    return {
        "r_squared": r2,
        "adj_r_squared": adj,
        "se_regression": float(se),
        "ssr": ssr,
        "f_statistic": f,
        "prob_f": pf,
        "durbin_watson": dw,
        "mean_dep": float(y.mean()),
        "sd_dep": float(y.std(ddof=1)),
    }


def lstsq_r2(y, X):
    b, *_ = np.linalg.lstsq(X, y, rcond=None)
    e = y - X @ b
    tss = float(((y - y.mean()) ** 2).sum())
    if tss == 0.0:
        return 0.0
    return 1.0 - float(e @ e) / tss


def pairwise_period_cov(resid, ent, yr, years):
    T = len(years)
    pos = {y: j for j, y in enumerate(years)}
    sums = np.zeros((T, T))
    counts = np.zeros((T, T))
    for c in sorted(set(ent)):
        v = np.zeros(T)
        m = np.zeros(T)
        for r, ec, y in zip(resid, ent, yr):
            if ec == c:
                v[pos[y]] = r
                m[pos[y]] = 1.0
        sums += np.outer(v, v)
        counts += np.outer(m, m)
    # every period pair must be observed jointly somewhere; the estimate
    # itself divides the zero-filled cross products by the entity count
    assert (counts > 0).all()
    return sums / len(set(ent))


def chi2_result(name, stat, df, p, n, null, keep, drop):
    return {
        "name": name,
        "statistic": float(stat),
        "df": df,
        "p_value": float(p),
        "n_obs": int(n),
        "null": null,
        "retained": bool(p >= 0.05),
        "verdict": keep if p >= 0.05 else drop,
    }


# ---------------------------------------------------------------- pipeline


def build_sample(cfg, entities, years, cells, spans, members):
    dep = cfg["dependent"]
    regs = [parse_regressor(r) for r in cfg["regressor"]]
    first, last = (int(s) for s in cfg["sample"].split())
    horizon = int(cfg["horizon_end"])

    def value(c, y, name, lag):
        if name == "dummy":
            yy = y - lag
            if yy < years[0]:
                return None
            return float(any(s <= yy <= min(e, horizon) for s, e in spans[c]))
        return cells.get((c, y - lag, name))

    rows = []
    for c in entities:
        if c not in members:
            continue
        for y in years:
            if not (first <= y <= last):
                continue
            yv = value(c, y, dep, 0)
            xs = [value(c, y, n, l) for n, l in regs]
            if yv is None or any(x is None for x in xs):
                continue
            rows.append((c, y, yv, [1.0] + xs))
    ent = [r[0] for r in rows]
    yr = [r[1] for r in rows]
    y = np.array([r[2] for r in rows])
    X = np.array([r[3] for r in rows])
    names = ["C"] + [f"{n}(-{l})" if l else n for n, l in regs]
    return ent, yr, y, X, names


def egls(ent, yr, y, X):
    n, k = X.shape
    years = sorted(set(yr))
    pos = {v: j for j, v in enumerate(years)}
    b0 = np.linalg.solve(X.T @ X, X.T @ y)
    e0 = y - X @ b0
    omega = pairwise_period_cov(e0, ent, yr, years)
    lam, vec = np.linalg.eigh(omega)
    S = vec @ np.diag(lam ** -0.5) @ vec.T

    # brute force: block-diagonal W with S_sub' S_sub per entity
    W = np.zeros((n, n))
    Sfull = np.zeros((n, n))
    start = 0
    blocks = []
    for c in dict.fromkeys(ent):
        idx = [i for i, ec in enumerate(ent) if ec == c]
        sel = [pos[yr[i]] for i in idx]
        Ssub = S[np.ix_(sel, sel)]
        W[np.ix_(idx, idx)] = Ssub.T @ Ssub
        Sfull[np.ix_(idx, idx)] = Ssub
        blocks.append((idx, sel))
        start += len(idx)
    b = np.linalg.solve(X.T @ W @ X, X.T @ W @ y)

    ys = Sfull @ y
    Xs = Sfull @ X
    es = ys - Xs @ b
    eu = y - X @ b

    # PCSE sandwich, dense
    omega2 = pairwise_period_cov(es, ent, yr, years)
    B = np.zeros((n, n))
    for idx, sel in blocks:
        B[np.ix_(idx, idx)] = omega2[np.ix_(sel, sel)]
    Ainv = np.linalg.inv(Xs.T @ Xs)
    V = Ainv @ Xs.T @ B @ Xs @ Ainv * (n / (n - k))
    se = np.sqrt(np.diag(V))
    t = b / se
    p = 2.0 * stats.t.sf(np.abs(t), n - k)
    return {
        "b": b,
        "se": se,
        "t": t,
        "p": p,
        "weighted": ols_stats(ys, Xs, es, True),
        "unweighted": ols_stats(y, X, eu, True),
        "resid_w": es,
        "resid_u": eu,
        "periods": len(years),
        "first": years[0],
        "last": years[-1],
    }


def effects_tests(ent, y, X):
    n, k = X.shape
    groups = list(dict.fromkeys(ent))
    N = len(groups)
    K = k - 1
    slopes = X[:, 1:]

    # pooled OLS
    bp = np.linalg.lstsq(X, y, rcond=None)[0]
    ssr_p = float(((y - X @ bp) ** 2).sum())

    # LSDV
    D = np.array([[1.0 if ec == g else 0.0 for g in groups] for ec in ent])
    Z = np.hstack([slopes, D])
    bz = np.linalg.solve(Z.T @ Z, Z.T @ y)
    ez = y - Z @ bz
    ssr_fe = float(ez @ ez)
    s2_fe = ssr_fe / (n - N - K)
    V_fe = s2_fe * np.linalg.inv(Z.T @ Z)[:K, :K]
    b_fe = bz[:K]

    df2 = n - N - K
    F = ((ssr_p - ssr_fe) / (N - 1)) / (ssr_fe / df2)
    LR = n * np.log(ssr_p / ssr_fe)
    f_res = {
        "name": "redundant_fe_f",
        "statistic": float(F),
        "df": [N - 1, df2],
        "p_value": float(stats.f.sf(F, N - 1, df2)),
        "n_obs": n,
    }
    pf = f_res["p_value"]
    f_res.update(
        null="Fixed effects are redundant",
        retained=bool(pf >= 0.05),
        verdict="Fixed effects model is redundant" if pf >= 0.05 else "Fixed effects model is indicated",
    )
    lr_res = chi2_result(
        "redundant_fe_lr",
        LR,
        [N - 1],
        stats.chi2.sf(LR, N - 1),
        n,
        "Fixed effects are redundant",
        "Fixed effects model is redundant",
        "Fixed effects model is indicated",
    )

    # Swamy-Arora components, explicit GLS
    sigma_e2 = s2_fe
    means_y = np.array([y[[i for i, ec in enumerate(ent) if ec == g]].mean() for g in groups])
    means_x = np.array([X[[i for i, ec in enumerate(ent) if ec == g]].mean(axis=0) for g in groups])
    counts = np.array([sum(1 for ec in ent if ec == g) for g in groups], dtype=float)
    bb = np.linalg.lstsq(means_x, means_y, rcond=None)[0]
    ssr_b = float(((means_y - means_x @ bb) ** 2).sum())
    sigma_u2 = max(0.0, ssr_b / (N - K - 1) - sigma_e2 * np.mean(1.0 / counts))
    P = np.zeros((n, n))
    for g, Ti in zip(groups, counts):
        idx = [i for i, ec in enumerate(ent) if ec == g]
        Om = sigma_e2 * np.eye(int(Ti)) + sigma_u2 * np.ones((int(Ti), int(Ti)))
        lam, vec = np.linalg.eigh(Om)
        P[np.ix_(idx, idx)] = np.sqrt(sigma_e2) * (vec @ np.diag(lam ** -0.5) @ vec.T)
    ys = P @ y
    Xs = P @ X
    b_re = np.linalg.solve(Xs.T @ Xs, Xs.T @ ys)
    e_re = ys - Xs @ b_re
    s2_re = float(e_re @ e_re) / (n - k)
    V_re = s2_re * np.linalg.inv(Xs.T @ Xs)

    q = b_fe - b_re[1:]
    Dv = V_fe - V_re[1:, 1:]
    warnings = []
    try:
        np.linalg.cholesky(Dv)
        H = float(q @ np.linalg.solve(Dv, q))
    except np.linalg.LinAlgError:
        H = float(q @ np.linalg.pinv(Dv) @ q)
        warnings.append("hausman: covariance difference not positive definite; pseudo-inverse used")
    haus = chi2_result(
        "hausman",
        H,
        [K],
        stats.chi2.sf(H, K),
        n,
        "Random effects are consistent",
        "Random effects model is indicated",
        "Fixed effects model is indicated",
    )
    return f_res, lr_res, haus, warnings


def residual_grid(resid, ent, yr):
    grid = {}
    for r, c, y in zip(resid, ent, yr):
        grid.setdefault(c, {})[y] = r
    return grid


def cd_tests(resid, ent, yr, n):
    grid = residual_grid(resid, ent, yr)
    groups = list(dict.fromkeys(ent))
    N = len(groups)
    lm = 0.0
    cd = 0.0
    for a in range(N):
        for b in range(a + 1, N):
            common = sorted(set(grid[groups[a]]) & set(grid[groups[b]]))
            u = np.array([grid[groups[a]][y] for y in common])
            v = np.array([grid[groups[b]][y] for y in common])
            rho = np.corrcoef(u, v)[0, 1]
            lm += len(common) * rho * rho
            cd += np.sqrt(len(common)) * rho
    cd *= np.sqrt(2.0 / (N * (N - 1)))
    df = N * (N - 1) // 2
    bp = chi2_result(
        "breusch_pagan_lm",
        lm,
        [df],
        stats.chi2.sf(lm, df),
        n,
        "No cross-section dependence",
        "No cross-section dependence",
        "Cross-section dependence",
    )
    pcd = chi2_result(
        "pesaran_cd",
        cd,
        [],
        2.0 * stats.norm.sf(abs(cd)),
        n,
        "No cross-section dependence",
        "No cross-section dependence",
        "Cross-section dependence",
    )
    return bp, pcd


def bpg(e, X):
    n, k = X.shape
    r2 = lstsq_r2(e * e, X)
    lm = n * r2
    return chi2_result(
        "breusch_pagan_godfrey",
        lm,
        [k - 1],
        stats.chi2.sf(lm, k - 1),
        n,
        "Homoskedasticity",
        "Model is homoskedastic",
        "Model is heteroskedastic",
    )


def breusch_godfrey(e, X, ent, yr, lags):
    lookup = {(c, y): r for r, c, y in zip(e, ent, yr)}
    rows = []
    target = []
    for i, (c, y) in enumerate(zip(ent, yr)):
        lagged = [lookup.get((c, y - j)) for j in range(1, lags + 1)]
        if any(v is None for v in lagged):
            continue
        rows.append(list(X[i]) + lagged)
        target.append(e[i])
    Z = np.array(rows)
    t = np.array(target)
    # residuals re-projected off the regressors on the rows that survive
    xs = Z[:, : X.shape[1]]
    t = t - xs @ np.linalg.lstsq(xs, t, rcond=None)[0]
    r2 = lstsq_r2(t, Z)
    n_aux = len(t)
    lm = n_aux * r2
    return chi2_result(
        "breusch_godfrey",
        lm,
        [lags],
        stats.chi2.sf(lm, lags),
        n_aux,
        "No serial correlation",
        "No serial correlation",
        "Serial correlation",
    )


def jarque_bera(e):
    n = len(e)
    d = e - e.mean()
    m2 = float((d ** 2).mean())
    s = float((d ** 3).mean()) / m2 ** 1.5
    kurt = float((d ** 4).mean()) / m2 ** 2
    jb = n / 6.0 * (s * s + (kurt - 3.0) ** 2 / 4.0)
    return chi2_result(
        "jarque_bera",
        jb,
        [2],
        stats.chi2.sf(jb, 2),
        n,
        "Residuals are normally distributed",
        "Residuals are normally distributed",
        "Residuals are not normally distributed",
    )


def collinearity(X, names, r2):
    pairs = []
    for a in range(1, X.shape[1]):
        for b in range(a + 1, X.shape[1]):
            pairs.append([names[a], names[b], float(np.corrcoef(X[:, a], X[:, b])[0, 1])])
    mx = max(abs(p[2]) for p in pairs)
    return {"max_abs_correlation": mx, "model_r_squared": r2, "present": not (r2 > mx), "pairs": pairs}


def correlations(cfg, entities, years, cells, members):
    dep = cfg["dependent"]
    bases = []
    for r in cfg["regressor"]:
        name, _ = parse_regressor(r)
        if name != "dummy" and name != dep and name not in bases:
            bases.append(name)
    out = []
    for v in bases:
        a, b = [], []
        for c in entities:
            if c not in members:
                continue
            for y in years:
                if (c, y, dep) in cells and (c, y, v) in cells:
                    a.append(cells[(c, y, dep)])
                    b.append(cells[(c, y, v)])
        out.append([dep, v, float(np.corrcoef(a, b)[0, 1])])
    return out


# ---------------------------------------------------------------- rendering


def num(x):
    return f"{x:>16.6f}"


def label(s, w=24):
    return f"{s:<{w}}"


def pair_line(l1, v1, l2, v2):
    return f"{label(l1)}{num(v1)}    {label(l2)}{num(v2)}"


def df_text(df):
    if len(df) == 0:
        return "-"
    if len(df) == 1:
        return str(df[0])
    return f"({df[0]}, {df[1]})"


TEST_TITLES = {
    "redundant_fe_f": "Redundant fixed effects (F)",
    "redundant_fe_lr": "Redundant fixed effects (LR)",
    "hausman": "Correlated random effects (Hausman)",
    "jarque_bera": "Normality (Jarque-Bera)",
    "breusch_pagan_lm": "Cross-section dependence (Breusch-Pagan LM)",
    "pesaran_cd": "Cross-section dependence (Pesaran CD)",
    "breusch_pagan_godfrey": "Heteroskedasticity (Breusch-Pagan-Godfrey)",
    "breusch_godfrey": "Serial correlation (Breusch-Godfrey)",
}


def render_model(lines, title, m, dep, periods_label):
    lines.append(DOUBLE_RULE)
    lines.append(f"Model: {title}")
    lines.append(RULE)
    lines.append(f"Dependent Variable: {dep.upper()}")
    lines.append("Method: Panel EGLS (Period SUR)")
    lines.append(f"Sample (adjusted): {m['first']} {m['last']}")
    lines.append(f"Periods included: {m['periods']}")
    lines.append(f"Cross-sections included: {m['cross_sections']}")
    bal = "balanced" if m["balanced"] else "unbalanced"
    lines.append(f"Total panel ({bal}) observations: {m['n_obs']}")
    lines.append("Linear estimation after one-step weighting matrix")
    lines.append("Period SUR (PCSE) standard errors & covariance (d.f. corrected)")
    lines.append(RULE)
    lines.append(
        f"{label('Variable')}{'Coefficient':>16}{'Std. Error':>16}{'t-Statistic':>16}{'Prob.':>16}"
    )
    lines.append(RULE)
    order = list(range(1, len(m["names"]))) + [0]
    for i in order:
        lines.append(
            f"{label(m['names'][i].upper())}{num(m['b'][i])}{num(m['se'][i])}{num(m['t'][i])}{num(m['p'][i])}"
        )
    lines.append(RULE)
    w = m["weighted"]
    lines.append("Weighted Statistics")
    lines.append(RULE)
    lines.append(pair_line("R-squared", w["r_squared"], "Mean dependent var", w["mean_dep"]))
    lines.append(pair_line("Adjusted R-squared", w["adj_r_squared"], "S.D. dependent var", w["sd_dep"]))
    lines.append(pair_line("S.E. of regression", w["se_regression"], "Sum squared resid", w["ssr"]))
    lines.append(pair_line("F-statistic", w["f_statistic"], "Durbin-Watson stat", w["durbin_watson"]))
    lines.append(f"{label('Prob(F-statistic)')}{num(w['prob_f'])}")
    lines.append(RULE)
    u = m["unweighted"]
    lines.append("Unweighted Statistics")
    lines.append(RULE)
    lines.append(pair_line("R-squared", u["r_squared"], "Mean dependent var", u["mean_dep"]))
    lines.append(pair_line("Sum squared resid", u["ssr"], "Durbin-Watson stat", u["durbin_watson"]))
    lines.append(RULE)
    lines.append(f"Pearson correlations ({periods_label})")
    for a, b, r in m["correlations"]:
        lines.append(f"{label(a.upper() + ' vs ' + b.upper())}{num(r)}")
    col = m["collinearity"]
    lines.append(RULE)
    lines.append("Multicollinearity screen")
    lines.append(f"{label('Max |correlation|')}{num(col['max_abs_correlation'])}")
    lines.append(f"{label('Model R-squared')}{num(col['model_r_squared'])}")
    lines.append(f"{label('Verdict')}{'present' if col['present'] else 'absent':>16}")
    lines.append(RULE)
    lines.append("Diagnostic tests")
    lines.append(RULE)
    lines.append(f"{'Test':<46}{'Statistic':>16}{'d.f.':>12}{'n':>6}{'Prob.':>12}  Result")
    for t in m["tests"]:
        lines.append(
            f"{TEST_TITLES[t['name']]:<46}{num(t['statistic'])}{df_text(t['df']):>12}"
            f"{t['n_obs']:>6}{t['p_value']:>12.6f}  {t['verdict']}"
        )
    for wmsg in m["warnings"]:
        lines.append(f"Warning: {wmsg}")


def render(cfg, median, inclusive, extractive, models, periods_label):
    lines = []
    lines.append("Panel EGLS replication report")
    lines.append(f"Indicator: {cfg['indicator']}")
    lines.append(f"Median score: {median:.6f}")
    lines.append(f"Inclusive cluster ({len(inclusive)}): {' '.join(inclusive)}")
    lines.append(f"Extractive cluster ({len(extractive)}): {' '.join(extractive)}")
    for key, m in models:
        render_model(lines, f"{key} institutions cluster", m, cfg["dependent"], periods_label)
    if len(models) == 2:
        (ka, a), (kb, b) = models
        lines.append(DOUBLE_RULE)
        lines.append("Cross-cluster comparison")
        lines.append(RULE)
        lines.append(f"{label('Variable')}{ka.capitalize():>16}{kb.capitalize():>16}")
        order = list(range(1, len(a["names"]))) + [0]
        for i in order:
            lines.append(f"{label(a['names'][i].upper())}{num(a['b'][i])}{num(b['b'][i])}")
        lines.append(
            f"{label('R-squared (weighted)')}{num(a['weighted']['r_squared'])}{num(b['weighted']['r_squared'])}"
        )
        lines.append(
            f"{label('R-squared (unweighted)')}{num(a['unweighted']['r_squared'])}{num(b['unweighted']['r_squared'])}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- main


def main(fixture_dir):
    d = Path(fixture_dir)
    cfg = read_config(d / "model.cfg")
    entities, years, variables, cells = read_panel(d / cfg["data"])
    scores = read_scores(d / cfg["scores"], cfg["indicator"])
    spans = read_events(d / cfg["events"], int(cfg["horizon_end"]))

    ordered = sorted(scores.values())
    m = len(ordered)
    median = ordered[m // 2] if m % 2 else 0.5 * (ordered[m // 2 - 1] + ordered[m // 2])
    inclusive = sorted(c for c, s in scores.items() if s > median)
    extractive = sorted(c for c, s in scores.items() if s <= median)

    lags = int(cfg.get("bg_lags", "2"))
    clusters = [c.strip() for c in cfg["clusters"].split(",")]
    models = []
    values = {
        "median": median,
        "inclusive": inclusive,
        "extractive": extractive,
        "clusters": {},
    }
    for key in clusters:
        members = set(inclusive if key == "inclusive" else extractive)
        ent, yr, y, X, names = build_sample(cfg, entities, years, cells, spans, members)
        est = egls(ent, yr, y, X)
        f_res, lr_res, haus, warnings = effects_tests(ent, y, X)
        bp, pcd = cd_tests(est["resid_u"], ent, yr, len(y))
        tests = [
            f_res,
            lr_res,
            haus,
            jarque_bera(est["resid_w"]),
            bp,
            pcd,
            bpg(est["resid_u"], X),
            breusch_godfrey(est["resid_u"], X, ent, yr, lags),
        ]
        sample_years = sorted(set(yr))
        per_entity = {}
        for c in ent:
            per_entity[c] = per_entity.get(c, 0) + 1
        balanced = all(v == len(sample_years) for v in per_entity.values())
        model = dict(est)
        model.update(
            names=names,
            n_obs=len(y),
            cross_sections=len(per_entity),
            balanced=balanced,
            tests=tests,
            warnings=warnings,
            correlations=correlations(cfg, entities, years, cells, members),
            collinearity=collinearity(X, names, est["weighted"]["r_squared"]),
        )
        models.append((key, model))
        values["clusters"][key] = {
            "names": names,
            "n_obs": len(y),
            "balanced": balanced,
            "coefficients": est["b"].tolist(),
            "std_errors": est["se"].tolist(),
            "t_stats": est["t"].tolist(),
            "p_values": est["p"].tolist(),
            "weighted_stats": est["weighted"],
            "unweighted_stats": est["unweighted"],
            "tests": tests,
            "correlations": model["correlations"],
            "collinearity": model["collinearity"],
        }

    periods_label = f"{years[0]}-{years[-1]}"
    text = render(cfg, median, inclusive, extractive, models, periods_label)
    (d / "expected_report.txt").write_text(text)
    (d / "oracle_values.json").write_text(json.dumps(values, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
