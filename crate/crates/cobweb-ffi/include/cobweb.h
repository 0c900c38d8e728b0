/* C interface to the cobweb concept-formation library.
 *
 * Handles are opaque and owned by the caller; release them with the
 * matching *_free function. Fallible calls return a CobwebStatus; on
 * failure, cobweb_last_error() returns a newly allocated message for
 * the calling thread (free it, like every string returned here, with
 * cobweb_string_free).
 *
 * Instances cross the boundary as flat JSON objects mapping attribute
 * names to strings (nominal) or numbers (continuous):
 *   {"color": "red", "size": 2.5}
 *
 * Maintained by hand against src/lib.rs; a test keeps the two in sync.
 */

#ifndef COBWEB_H
#define COBWEB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum CobwebStatus {
  COBWEB_OK = 0,
  COBWEB_NULL_POINTER = 1,
  COBWEB_INVALID_ARGUMENT = 2,
  COBWEB_PARSE_ERROR = 3,
  COBWEB_MODEL_ERROR = 4,
  COBWEB_NO_PREDICTION = 5,
  COBWEB_PANIC = 6,
} CobwebStatus;

/* Opaque handles. */
typedef struct CobwebTree CobwebTree;
typedef struct CobwebConvModel CobwebConvModel;

/* Errors and strings. */
char *cobweb_last_error(void);
void cobweb_string_free(char *s);

/* Concept trees (Cobweb / Cobweb/3 over attribute-value instances). */
CobwebTree *cobweb_tree_new(double acuity);
void cobweb_tree_free(CobwebTree *tree);
CobwebStatus cobweb_tree_ifit_json(CobwebTree *tree,
                                   const char *instance_json,
                                   uint32_t *out_node);
CobwebStatus cobweb_tree_categorize_json(const CobwebTree *tree,
                                         const char *instance_json,
                                         uint32_t *out_node);
CobwebStatus cobweb_tree_predict_json(const CobwebTree *tree,
                                      const char *instance_json,
                                      const char *target,
                                      char **out_value);
char *cobweb_tree_to_json(const CobwebTree *tree);
CobwebTree *cobweb_tree_from_json(const char *doc);
uint32_t cobweb_tree_node_count(const CobwebTree *tree);
uint64_t cobweb_tree_total_instances(const CobwebTree *tree);
uint32_t cobweb_tree_children(const CobwebTree *tree, uint32_t node,
                              uint32_t *out_children, size_t cap);

/* Convolutional Cobweb over row-major pixel buffers. */
CobwebConvModel *cobweb_conv_new(size_t rows, size_t cols,
                                 size_t filter_size, double acuity);
void cobweb_conv_free(CobwebConvModel *model);
CobwebStatus cobweb_conv_fit_image(CobwebConvModel *model,
                                   const double *pixels, size_t len,
                                   uint8_t label);
CobwebStatus cobweb_conv_predict_image(const CobwebConvModel *model,
                                       const double *pixels, size_t len,
                                       uint8_t *out_label);
char *cobweb_conv_to_json(const CobwebConvModel *model);
CobwebConvModel *cobweb_conv_from_json(const char *doc);
uint32_t cobweb_conv_filter_count(const CobwebConvModel *model);

#ifdef __cplusplus
}
#endif

#endif /* COBWEB_H */
