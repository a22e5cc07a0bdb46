#include <stdio.h>
#include <string.h>
#include "sgbermudan.h"

static int fail(const char *what) {
    char buf[256];
    sgb_last_error_message(buf, sizeof buf);
    fprintf(stderr, "%s: %s\n", what, buf);
    return 1;
}

int main(void) {
    uint64_t n_cgl = 0, n_inner = 0;
    if (sgb_grid_counts(6, 5, &n_cgl, &n_inner) != SGB_STATUS_OK)
        return fail("grid counts");

    SgbMarket *market = NULL;
    SgbOption *option = NULL;
    SgbPricer *pricer = NULL;
    if (sgb_market_equicorrelated(2, 100.0, 0.03, 0.0, 0.2, 0.5, &market) != SGB_STATUS_OK)
        return fail("market");
    if (sgb_option_new(100.0, 0.25, SGB_PAYOFF_ARITHMETIC_PUT, 10, &option) != SGB_STATUS_OK)
        return fail("option");
    SgbPricingOptions opts = sgb_pricing_options_default();
    opts.level = 3;
    opts.size = 4;
    if (sgb_pricer_new(market, option, &opts, &pricer) != SGB_STATUS_OK)
        return fail("pricer");
    SgbPriceResult result;
    if (sgb_pricer_run(pricer, &result) != SGB_STATUS_OK)
        return fail("run");

    SgbMarket *bad = NULL;
    SgbStatus status = sgb_market_equicorrelated(2, -1.0, 0.03, 0.0, 0.2, 0.5, &bad);
    char msg[128];
    sgb_last_error_message(msg, sizeof msg);

    printf("%s %llu %llu %.12f %d %d\n", sgb_version(), (unsigned long long)n_cgl, (unsigned long long)n_inner,
           result.price, (int)status, bad == NULL && strstr(msg, "spot") != NULL);
    sgb_pricer_free(pricer);
    sgb_option_free(option);
    sgb_market_free(market);
    return 0;
}
