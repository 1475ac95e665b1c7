#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <vector>

namespace prvkit
{

using Nanoseconds = std::uint64_t;

/// One task of an application: its thread count and the 1-based node it runs on.
struct TaskInfo
{
    std::uint32_t threads = 1;
    std::uint32_t node = 1;

    friend bool operator==(const TaskInfo&, const TaskInfo&) = default;
};

struct Application
{
    std::vector<TaskInfo> tasks;

    friend bool operator==(const Application&, const Application&) = default;
};

/**
 * The virtual-resource taxonomy (WORKLOAD > APPLICATION > TASK > THREAD).
 *
 * Identifiers are implicit: application i is applications[i-1], and so on.
 */
struct ProcessModel
{
    std::vector<Application> applications;

    std::size_t total_tasks() const;
    std::size_t total_threads() const;

    /// Null if (appl, task) does not exist.
    const TaskInfo* find_task(std::uint32_t appl, std::uint32_t task) const;

    /// 0-based position of (appl, task) when all tasks are laid out application by application.
    std::size_t global_task_index(std::uint32_t appl, std::uint32_t task) const;

    bool contains(std::uint32_t appl, std::uint32_t task, std::uint32_t thread) const;

    friend bool operator==(const ProcessModel&, const ProcessModel&) = default;
};

/// The physical taxonomy (SYSTEM > NODE > CPU).
struct ResourceModel
{
    std::vector<std::uint32_t> cpus_per_node;

    std::size_t node_count() const
    {
        return cpus_per_node.size();
    }

    std::size_t total_cpus() const;

    friend bool operator==(const ResourceModel&, const ResourceModel&) = default;
};

/// Checks both taxonomies and the task-to-node mapping; throws InvalidModelError.
void validate_models(const ProcessModel& process, const ResourceModel& resources);

/**
 * Builds and validates a process/resource model pair.
 *
 * `threads_per_task` and `task_node_assignment` are flattened over all tasks of
 * all applications, in application order.
 */
std::pair<ProcessModel, ResourceModel> build_model(std::size_t n_applications,
                                                   const std::vector<std::uint32_t>& tasks_per_application,
                                                   const std::vector<std::uint32_t>& threads_per_task,
                                                   const std::vector<std::uint32_t>& task_node_assignment,
                                                   const std::vector<std::uint32_t>& cpus_per_node);

/// One application with `tasks` tasks of `threads` threads each, all on node 1.
std::pair<ProcessModel, ResourceModel> single_node_model(std::uint32_t tasks, std::uint32_t threads = 1,
                                                         std::uint32_t cpus = 1);

/// A coordinate on both object models. cpu 0 means unknown or unpinned.
struct Location
{
    std::uint32_t cpu = 0;
    std::uint32_t appl = 1;
    std::uint32_t task = 1;
    std::uint32_t thread = 1;

    friend auto operator<=>(const Location&, const Location&) = default;
};

/// Same (appl, task, thread), ignoring cpu.
inline bool same_thread(const Location& a, const Location& b)
{
    return a.appl == b.appl && a.task == b.task && a.thread == b.thread;
}

/**
 * The callbacks that tell the tracer which TASK and THREAD the caller is.
 *
 * Copies share a freeze flag: once a tracer has been initialised with a
 * provider, neither it nor any copy may be remapped.
 */
class IdentityProvider
{
public:
    using IdFn = std::function<std::uint32_t()>;

    /// Task 1 of 1; threads numbered 1, 2, ... in the order they first resolve.
    IdentityProvider();

    IdFn task_id_fn;
    IdFn num_tasks_fn;
    IdFn thread_id_fn;
    IdFn num_threads_fn;
    IdFn cpu_fn;
    std::uint32_t application = 1;

    bool frozen() const;
    void freeze() const;

private:
    std::shared_ptr<std::atomic<bool>> frozen_;
};

IdentityProvider set_taskid_function(IdentityProvider provider, IdentityProvider::IdFn task_id,
                                     IdentityProvider::IdFn num_tasks = {});
IdentityProvider set_threadid_function(IdentityProvider provider, IdentityProvider::IdFn thread_id,
                                       IdentityProvider::IdFn num_threads = {});

/// Worker `worker` of `workers` becomes task `worker` of `workers`.
IdentityProvider distributed_provider(std::uint32_t worker, std::uint32_t workers);

/// Resolves the caller's coordinates; throws IdentityRangeError when a callback is out of range.
Location resolve_location(const IdentityProvider& provider, const ProcessModel& process,
                          const ResourceModel& resources);

} // namespace prvkit
