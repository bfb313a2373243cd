#ifndef EITPAD_H
#define EITPAD_H

/* Generated by cbindgen from eitpad-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of a fallible call. Zero is success.
typedef enum EitpadStatus {
  EITPAD_STATUS_OK = 0,
  // A required pointer argument was null.
  EITPAD_STATUS_NULL_ARGUMENT = 1,
  // An argument failed validation; see `eitpad_last_error_message`.
  EITPAD_STATUS_INVALID_ARGUMENT = 2,
  // A file could not be read or parsed.
  EITPAD_STATUS_IO = 3,
  // A linear system could not be solved.
  EITPAD_STATUS_NUMERIC = 4,
  // Unexpected internal failure (caught panic).
  EITPAD_STATUS_INTERNAL = 5,
} EitpadStatus;

// Simulation domain: tetrahedral or triangular finite-element mesh.
typedef struct EitpadMesh EitpadMesh;

// Electrode pad bound to the surface of a specific mesh.
typedef struct EitpadPad EitpadPad;

// Measurement schedule: a list of four-pole channels.
typedef struct EitpadPlan EitpadPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *eitpad_version(void);

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread. Never null;
// empty string when nothing failed yet.
const char *eitpad_last_error_message(void);

// Generate a cylindrical mesh (axis along z from 0 to `height_mm`) with
// roughly `target_elements` tetrahedra and uniform conductivity
// `sigma_s_m`, and store the handle in `*out`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one pointer.
enum EitpadStatus eitpad_mesh_cylinder(double radius_mm,
                                       double height_mm,
                                       size_t target_elements,
                                       double sigma_s_m,
                                       struct EitpadMesh **out);

// Load a mesh from the plain-text format described in the toolkit docs.
//
// # Safety
// `path` must be a NUL-terminated string; `out` as in
// [`eitpad_mesh_cylinder`].
enum EitpadStatus eitpad_mesh_load(const char *path, struct EitpadMesh **out);

// Release a mesh. Passing null is a no-op.
//
// # Safety
// `mesh` must be a handle from this library, not yet freed.
void eitpad_mesh_free(struct EitpadMesh *mesh);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `mesh` must be a live handle or null.
size_t eitpad_mesh_node_count(const struct EitpadMesh *mesh);

// Number of elements, or 0 for a null handle.
//
// # Safety
// `mesh` must be a live handle or null.
size_t eitpad_mesh_element_count(const struct EitpadMesh *mesh);

// Drape a rows x cols electrode grid (pitch `spacing_mm`) over the mesh
// surface. `origin_xyz` anchors the pad centre (nearest surface point);
// `orientation_xyz` is the in-plane direction columns advance along. Both
// point at 3 doubles.
//
// # Safety
// `mesh` must be a live handle; `origin_xyz` and `orientation_xyz` must
// point at 3 readable doubles; `out` at writable pointer storage.
enum EitpadStatus eitpad_pad_place(const struct EitpadMesh *mesh,
                                   size_t rows,
                                   size_t cols,
                                   double spacing_mm,
                                   const double *origin_xyz,
                                   const double *orientation_xyz,
                                   struct EitpadPad **out);

// Release a pad. Passing null is a no-op.
//
// # Safety
// `pad` must be a handle from this library, not yet freed.
void eitpad_pad_free(struct EitpadPad *pad);

// Number of electrodes, or 0 for a null handle.
//
// # Safety
// `pad` must be a live handle or null.
size_t eitpad_pad_electrode_count(const struct EitpadPad *pad);

// Build the default measurement schedule for the pad's grid: opposite
// rectangle edges plus diagonal channels, deduplicated.
//
// # Safety
// `pad` must be a live handle; `out` must point at writable pointer
// storage.
enum EitpadStatus eitpad_plan_default(const struct EitpadPad *pad, struct EitpadPlan **out);

// Release a plan. Passing null is a no-op.
//
// # Safety
// `plan` must be a handle from this library, not yet freed.
void eitpad_plan_free(struct EitpadPlan *plan);

// Number of channels, or 0 for a null handle.
//
// # Safety
// `plan` must be a live handle or null.
size_t eitpad_plan_channel_count(const struct EitpadPlan *plan);

// Solve the forward problem: voltages for every channel of `plan` when
// driving `current_a` amperes, written to `out_voltages` (length
// `out_len`, which must equal the channel count).
//
// # Safety
// Handles must be live; `out_voltages` must point at `out_len` writable
// doubles.
enum EitpadStatus eitpad_solve(const struct EitpadMesh *mesh,
                               const struct EitpadPad *pad,
                               const struct EitpadPlan *plan,
                               double current_a,
                               double *out_voltages,
                               size_t out_len);

// Difference imaging: reconstruct per-element conductivity change from
// per-ampere channel voltage changes (`delta_per_ampere`, length
// `delta_len` = channel count). `lambda <= 0` picks the Jacobian-scaled
// default; `p` in [0, 1] is the sensitivity-normalization exponent.
// Writes one value per mesh element to `out_values` (`out_len` must equal
// the element count).
//
// # Safety
// Handles must be live; `delta_per_ampere` must point at `delta_len`
// readable doubles and `out_values` at `out_len` writable doubles.
enum EitpadStatus eitpad_reconstruct(const struct EitpadMesh *mesh,
                                     const struct EitpadPad *pad,
                                     const struct EitpadPlan *plan,
                                     const double *delta_per_ampere,
                                     size_t delta_len,
                                     double lambda,
                                     double p,
                                     double *out_values,
                                     size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EITPAD_H */
