#include <math.h>
#include <stdio.h>
#include <string.h>

#include "refgame.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "check failed line %d: %s\n", __LINE__, #cond); \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    size_t d = 0;
    CHECK(rg_levenshtein("kitten", "sitting", &d) == RG_STATUS_OK && d == 3);

    static const char *onset[3] = {"t", "k", "p"};
    static const char *vowel[3] = {"o", "a", "e"};
    static const char *coda[3] = {"s", "n", "w"};
    RgCorpus *c = rg_corpus_new();
    char word[8];
    for (int s = 0; s < 3; s++)
        for (int col = 0; col < 3; col++)
            for (int a = 0; a < 3; a++) {
                snprintf(word, sizeof word, "%s%s%s", onset[s], vowel[col], coda[a]);
                CHECK(rg_corpus_push(c, (uint8_t)(s + 1), (uint8_t)col, (uint8_t)(a + 1), word) == RG_STATUS_OK);
            }
    CHECK(rg_corpus_len(c) == 27);
    RgMetric m;
    CHECK(rg_corpus_metric(c, NULL, "topsim", &m) == RG_STATUS_OK);
    CHECK(m.has_value && m.defined && fabs(m.value - 1.0) < 1e-12);

    CHECK(rg_corpus_push(c, 1, 7, 1, "wa") == RG_STATUS_OUT_OF_RANGE);
    char msg[128];
    CHECK(rg_last_error_message(msg, sizeof msg) > 0 && strstr(msg, "colour") != NULL);
    CHECK(rg_corpus_metric(c, NULL, "nonsense", &m) == RG_STATUS_INVALID_ARGUMENT);
    rg_corpus_free(c);

    double a[] = {1, 2, 3, 4, 5}, b[] = {2, 4, 6, 8, 11};
    RgTestResult t;
    CHECK(rg_pearson_test(a, 5, b, 5, &t) == RG_STATUS_OK && t.statistic > 0.99);
    CHECK(rg_welch_ttest(a, 1, b, 5, &t) == RG_STATUS_NOT_COMPUTABLE);

    double y[12], x[24];
    uint32_t g[12];
    for (int i = 0; i < 12; i++) {
        g[i] = (uint32_t)(i % 3);
        x[2 * i] = 1.0;
        x[2 * i + 1] = (double)i;
        y[i] = 0.5 * i + (double)(i % 3) + 0.1 * ((i * 7) % 5);
    }
    RgLmmFit *fit = NULL;
    CHECK(rg_lmm_fit(y, x, 12, 2, g, &fit) == RG_STATUS_OK && fit != NULL);
    RgLmmSummary sum;
    CHECK(rg_lmm_summary(fit, &sum) == RG_STATUS_OK && sum.n_coef == 2 && sum.converged);
    double beta = 0, se = 0;
    CHECK(rg_lmm_coef(fit, 1, &beta, &se, NULL) == RG_STATUS_OK && fabs(beta - 0.5) < 0.1 && se > 0);
    CHECK(rg_lmm_coef(fit, 2, &beta, NULL, NULL) == RG_STATUS_OUT_OF_RANGE);
    rg_lmm_free(fit);

    printf("ok %s\n", rg_version());
    return 0;
}
