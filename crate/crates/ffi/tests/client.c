#include <stdio.h>
#include <stdlib.h>

#include "abstract_mining.h"

static unsigned char *slurp(const char *path, size_t *len) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long size = ftell(f);
    fseek(f, 0, SEEK_SET);
    unsigned char *buf = malloc((size_t)size);
    *len = fread(buf, 1, (size_t)size, f);
    fclose(f);
    return buf;
}

int main(int argc, char **argv) {
    if (argc < 2) return 2;
    size_t len = 0;
    unsigned char *data = slurp(argv[1], &len);
    if (!data) return 3;

    AmSession *s = NULL;
    AmStatus st = am_session_open(data, len, "sample.medline", 3, 42, &s);
    free(data);
    if (st != AM_STATUS_OK) {
        fprintf(stderr, "%s: %s\n", am_status_name(st), am_last_error_message());
        return 1;
    }
    char *panel = NULL;
    if (am_session_panel_text(s, &panel) != AM_STATUS_OK) return 1;
    fputs(panel, stdout);
    am_string_free(panel);

    st = am_session_back(s);
    printf("back: %s\n", am_status_name(st));
    am_session_free(s);
    return st == AM_STATUS_AT_ROOT ? 0 : 1;
}
