// Interrupt controller driver, reconstructed for the walkthrough fixture.
#include <linux/init.h>
#include <linux/io.h>
#include <linux/jump_label.h>

union gic_base {
	void __iomem *common_base;
	void __percpu * __iomem *percpu_base;
};

struct gic_chip_data {
	union gic_base dist_base;
	unsigned long percpu_offset;
};

#ifdef CONFIG_GIC_NON_BANKED
static void enable_frankengic(void)
{
	static_branch_enable(&frankengic_key);
}
#else
#define enable_frankengic()	do { } while(0)
#endif

static void gic_dist_init(struct gic_chip_data *gic)
{
	writel_relaxed(0, gic->dist_base.common_base);
}

static int gic_init_bases(struct gic_chip_data *gic)
{
	if (gic->percpu_offset) {
		enable_frankengic();
	}
	gic_dist_init(gic);
	return 0;
}
